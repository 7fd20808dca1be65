//! File formats: JSON lines, CSV tables with canonical feature columns, digests.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{FeatureTable, FeatureVector, FEATURE_NAMES, NUM_FEATURES};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&raw).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Fixed six-decimal rendering used by every CSV output.
pub fn fmt_f64(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

/// Writes a CSV table; `rows` are already rendered cells.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        path: path.to_owned(),
        line,
        message: e.to_string(),
    }
}

/// Header of a table keyed by `key` followed by the 17 canonical columns.
pub fn feature_header(key: &'static str) -> Vec<&'static str> {
    let mut h = vec![key];
    h.extend(FEATURE_NAMES);
    h
}

pub fn write_feature_csv(path: &Path, key: &'static str, ids: &[String], rows: &[[f64; NUM_FEATURES]]) -> Result<()> {
    let rendered: Vec<Vec<String>> = ids
        .iter()
        .zip(rows)
        .map(|(id, row)| {
            let mut cells = vec![id.clone()];
            cells.extend(row.iter().map(|v| fmt_f64(*v)));
            cells
        })
        .collect();
    write_csv(path, &feature_header(key), &rendered)
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let rows: Vec<[f64; NUM_FEATURES]> = table.vectors.iter().map(|v| v.0).collect();
    write_feature_csv(path, "text_id", &table.text_ids, &rows)
}

/// Reads a table written by [`write_feature_csv`], checking the header.
pub fn read_feature_csv(path: &Path, key: &str) -> Result<(Vec<String>, Vec<[f64; NUM_FEATURES]>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected: Vec<&str> = std::iter::once(key).chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i + 2;
        let mut row = [0.0; NUM_FEATURES];
        for (c, slot) in row.iter_mut().enumerate() {
            let cell = rec.get(c + 1).unwrap_or("");
            *slot = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("column {} is not a finite number: {cell:?}", FEATURE_NAMES[c]),
            })?;
        }
        ids.push(rec.get(0).unwrap_or("").to_owned());
        rows.push(row);
    }
    Ok((ids, rows))
}

pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let (text_ids, rows) = read_feature_csv(path, "text_id")?;
    Ok(FeatureTable {
        text_ids,
        vectors: rows.into_iter().map(FeatureVector).collect(),
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
