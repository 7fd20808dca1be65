//! Pearson correlation of feature columns and the redundancy filter.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise Pearson correlations. Entries involving a zero-variance column
/// are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub values: Vec<Vec<Option<f64>>>,
    pub zero_variance: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

pub fn correlation_matrix(x: &DMatrix<f64>) -> Result<CorrelationMatrix> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!("correlation needs 2 rows, got {n}")));
    }
    let centered: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter().map(|v| v - mean).collect()
        })
        .collect();
    let ss: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let zero_variance: Vec<bool> = ss.iter().map(|&s| s == 0.0).collect();
    let mut values = vec![vec![None; d]; d];
    for i in 0..d {
        if zero_variance[i] {
            continue;
        }
        values[i][i] = Some(1.0);
        for j in i + 1..d {
            if zero_variance[j] {
                continue;
            }
            let cov: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = (cov / (ss[i].sqrt() * ss[j].sqrt())).clamp(-1.0, 1.0);
            values[i][j] = Some(r);
            values[j][i] = Some(r);
        }
    }
    Ok(CorrelationMatrix { values, zero_variance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

/// Unordered pairs with `|r| >= threshold`, strongest first.
pub fn redundancy_report(corr: &CorrelationMatrix, names: &[&str], threshold: f64) -> Vec<RedundantPair> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..corr.dim() {
        for j in i + 1..corr.dim() {
            if let Some(r) = corr.get(i, j) {
                if r.abs() >= threshold {
                    out.push((i, j, r));
                }
            }
        }
    }
    out.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then((a.0, a.1).cmp(&(b.0, b.1))));
    out.into_iter()
        .map(|(i, j, r)| RedundantPair {
            a: names[i].to_owned(),
            b: names[j].to_owned(),
            r,
        })
        .collect()
}
