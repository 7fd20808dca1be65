//! Batch workflow behind the command-line tool: each stage reads its
//! inputs from a run directory, writes its artifacts there and returns the
//! artifact names.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    correlation_matrix, fit_pca, kmeans, project_centroids, radar_table, reader_ai_rates, redundancy_report,
    select_k, ai_preference_rate, cluster_membership_report, convex_hull, RateScope,
};
use crate::error::{Error, Result};
use crate::io::{
    fmt_f64, read_feature_csv, read_features, read_json, read_jsonl, sha256_file, sha256_hex, write_csv,
    write_feature_csv, write_features, write_json, write_jsonl,
};
use crate::learners::{
    consensus_pairs, fit_logistic_baseline, fit_reader, ForestGrid, ForestHyperparams, SplitConfig, TrainMode,
    CONSENSUS_READER, MIN_UNTIED_PAIRS,
};
use crate::metrics::{extract_features, ExtractionFlags, MetricContext};
use crate::model::{
    validate_bundle, AnnotationBundle, AuthorKind, Dataset, FeatureTable, PairInstance, PreferenceScore,
    ReaderProfile, FEATURE_NAMES, NUM_FEATURES,
};
use crate::prefs::{build_preferences, count_pairs, pairs_by_reader, sample_pairs};
use crate::seed::{derive_seed, DEFAULT_MASTER_SEED};
use crate::synth::{run_experiment, ExperimentSpec};
use crate::topic::{fit_text_topics, TopicConfig};

pub const FEATURES_FILE: &str = "features.csv";
pub const TOPIC_DIAGNOSTICS_FILE: &str = "topic_diagnostics.jsonl";
pub const EXTRACTION_FLAGS_FILE: &str = "extraction_flags.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const CENTROIDS_FILE: &str = "centroids.csv";
pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const EXCLUDED_FILE: &str = "excluded_readers.jsonl";
pub const SKIPPED_FILE: &str = "skipped_readers.jsonl";
pub const PROFILES_FILE: &str = "profiles.jsonl";
pub const F1_FILE: &str = "f1.csv";
pub const CV_FILE: &str = "cv_cells.csv";
pub const RECOVERY_FILE: &str = "recovery_report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    /// Full cross-validated forest grid.
    Full,
    /// Reduced grid of eight cells.
    Small,
    /// Default hyperparameters on a single train/test split.
    Fixed,
}

impl GridChoice {
    pub fn mode(self) -> TrainMode {
        match self {
            GridChoice::Full => TrainMode::Grid(ForestGrid::full()),
            GridChoice::Small => TrainMode::Grid(ForestGrid::small()),
            GridChoice::Fixed => TrainMode::Fixed(ForestHyperparams::default()),
        }
    }
}

/// Effective run configuration. Precedence: command-line flags, then the
/// config file, then these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide. Results do not depend on
    /// it, so it is left out of manifests and the config hash.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub top_fraction: f64,
    /// Profile clusters; 0 selects k by silhouette over `k_range`.
    pub k_clusters: usize,
    pub k_range: [usize; 2],
    pub pca_standardize: bool,
    pub grid: GridChoice,
    /// Cap on untied pairs per reader; 0 keeps all.
    pub max_pairs_per_reader: usize,
    pub redundancy_threshold: f64,
    pub topic: TopicConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_MASTER_SEED,
            workers: 0,
            top_fraction: crate::prefs::DEFAULT_TOP_FRACTION,
            k_clusters: 2,
            k_range: [2, 6],
            pca_standardize: true,
            grid: GridChoice::Full,
            max_pairs_per_reader: 0,
            redundancy_threshold: 0.7,
            topic: TopicConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(raw: &str, path: &Path) -> Result<Self> {
        toml::from_str(raw).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.span().map(|s| raw[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_owned(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(Error::Invalid(format!("top_fraction {} outside (0, 1]", self.top_fraction)));
        }
        if self.k_range[0] < 2 || self.k_range[0] > self.k_range[1] {
            return Err(Error::Invalid(format!("invalid k_range {:?}", self.k_range)));
        }
        if self.k_clusters == 1 {
            return Err(Error::Invalid("k_clusters must be 0 (auto) or >= 2".into()));
        }
        Ok(())
    }

    /// Digest of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

fn path_in(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

// ---------------------------------------------------------------- extract

/// Reads annotation bundles keyed by text id, rejecting duplicates.
pub fn load_bundles(path: &Path) -> Result<BTreeMap<String, AnnotationBundle>> {
    let bundles: Vec<AnnotationBundle> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for (i, b) in bundles.into_iter().enumerate() {
        let id = b.text_id.clone();
        if out.insert(id.clone(), b).is_some() {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("duplicate bundle for text {id:?}"),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FlagRecord {
    text_id: String,
    #[serde(flatten)]
    flags: ExtractionFlags,
}

pub fn run_extract(dataset: &Dataset, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let path = dataset
        .annotations_path
        .as_ref()
        .ok_or_else(|| Error::Schema(format!("dataset {:?} names no annotations file", dataset.name)))?;
    let bundles = load_bundles(path)?;
    let known: BTreeMap<&str, ()> = dataset.texts.iter().map(|t| (t.text_id.as_str(), ())).collect();
    if let Some(id) = bundles.keys().find(|id| !known.contains_key(id.as_str())) {
        return Err(Error::DanglingReference { text_id: id.clone() });
    }
    let mut problems = Vec::new();
    for text in &dataset.texts {
        match bundles.get(&text.text_id) {
            None => problems.push(format!("{}: no annotation bundle", text.text_id)),
            Some(b) => problems.extend(
                validate_bundle(b, text)
                    .into_iter()
                    .map(|v| format!("{}: {v}", text.text_id)),
            ),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Schema(problems.join("; ")));
    }

    let results: Vec<Result<_>> = dataset
        .texts
        .par_iter()
        .map(|text| {
            let bundle = &bundles[&text.text_id];
            let (topics, diagnostics) = fit_text_topics(bundle, &config.topic, config.seed)?;
            let extraction = extract_features(text, &MetricContext::new(bundle, Some(&topics)))?;
            Ok((extraction, diagnostics))
        })
        .collect();
    let mut table = FeatureTable::default();
    let mut diagnostics = Vec::new();
    let mut flags = Vec::new();
    for (text, r) in dataset.texts.iter().zip(results) {
        let (extraction, diag) = r.map_err(|e| match e {
            Error::Metric { metric, reason } => Error::Metric {
                metric,
                reason: format!("text {}: {reason}", text.text_id),
            },
            other => other,
        })?;
        table.push(text.text_id.clone(), extraction.features);
        diagnostics.push(diag);
        flags.push(FlagRecord {
            text_id: text.text_id.clone(),
            flags: extraction.flags,
        });
    }
    create_dir(out)?;
    write_features(&path_in(out, FEATURES_FILE), &table)?;
    write_jsonl(&path_in(out, TOPIC_DIAGNOSTICS_FILE), &diagnostics)?;
    write_jsonl(&path_in(out, EXTRACTION_FLAGS_FILE), &flags)?;
    Ok(vec![FEATURES_FILE.into(), TOPIC_DIAGNOSTICS_FILE.into(), EXTRACTION_FLAGS_FILE.into()])
}

// ------------------------------------------------------------------ prefs

pub fn write_scores(path: &Path, scores: &[PreferenceScore]) -> Result<()> {
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| vec![s.reader_id.clone(), s.text_id.clone(), fmt_f64(s.raw), fmt_f64(s.rho)])
        .collect();
    write_csv(path, &["reader_id", "text_id", "raw", "rho"], &rows)
}

pub fn read_scores(path: &Path) -> Result<Vec<PreferenceScore>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: 0,
        message: e.to_string(),
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_owned(),
        line,
        message,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != ["reader_id", "text_id", "raw", "rho"] {
        return Err(parse_err(1, format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse().map_err(|_| parse_err(line, format!("bad number {:?}", &rec[j])))
        };
        out.push(PreferenceScore {
            reader_id: rec[0].to_owned(),
            text_id: rec[1].to_owned(),
            raw: num(2)?,
            rho: num(3)?,
        });
    }
    Ok(out)
}

pub fn run_prefs(dataset: &Dataset, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let features = read_features(&path_in(out, FEATURES_FILE))?;
    let lookup = features.lookup();
    let data = build_preferences(&dataset.evaluations, &lookup, config.top_fraction)?;
    write_scores(&path_in(out, SCORES_FILE), &data.scores)?;
    let ids: Vec<String> = data.centroids.keys().cloned().collect();
    let rows: Vec<[f64; NUM_FEATURES]> = data.centroids.values().copied().collect();
    write_feature_csv(&path_in(out, CENTROIDS_FILE), "reader_id", &ids, &rows)?;
    write_jsonl(&path_in(out, PAIRS_FILE), &data.pairs)?;
    write_jsonl(&path_in(out, EXCLUDED_FILE), &data.excluded)?;
    Ok(vec![SCORES_FILE.into(), CENTROIDS_FILE.into(), PAIRS_FILE.into(), EXCLUDED_FILE.into()])
}

// ------------------------------------------------------------------ train

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedReader {
    pub reader_id: String,
    pub n_pairs: usize,
    pub reason: String,
}

/// File-name-safe form of a reader id.
pub fn model_file_name(reader_id: &str) -> String {
    let safe: String = reader_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("models/{safe}.json")
}

struct TrainedReader {
    fit: crate::learners::ReaderFit,
    logistic_f1: Option<f64>,
}

fn train_one(reader_id: &str, dataset: &str, pairs: &[PairInstance], config: &RunConfig) -> Result<TrainedReader> {
    let seed = derive_seed(config.seed, &format!("train:{reader_id}"));
    let pairs = if config.max_pairs_per_reader > 0 {
        sample_pairs(pairs.to_vec(), config.max_pairs_per_reader, derive_seed(seed, "sample"))
    } else {
        pairs.to_vec()
    };
    let split = SplitConfig::default();
    let fit = fit_reader(reader_id, dataset, &pairs, &config.grid.mode(), &split, seed)?;
    let logistic_f1 = match fit_logistic_baseline(&pairs, &split, seed) {
        Ok(r) => Some(r.test_f1),
        Err(Error::InsufficientData(_) | Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(TrainedReader { fit, logistic_f1 })
}

pub fn run_train(dataset_name: &str, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let pairs: Vec<PairInstance> = read_jsonl(&path_in(out, PAIRS_FILE))?;
    let by_reader = pairs_by_reader(&pairs);
    let mut skipped = Vec::new();
    let mut eligible = Vec::new();
    for (reader, p) in &by_reader {
        let n = count_pairs(p);
        if n < MIN_UNTIED_PAIRS {
            skipped.push(SkippedReader {
                reader_id: reader.clone(),
                n_pairs: n,
                reason: format!("insufficient pairs: {n} untied, need {MIN_UNTIED_PAIRS}"),
            });
        } else {
            eligible.push((reader.clone(), p));
        }
    }
    if eligible.is_empty() {
        let detail: Vec<String> = skipped.iter().map(|s| format!("{} has {}", s.reader_id, s.n_pairs)).collect();
        return Err(Error::InsufficientData(format!(
            "insufficient pairs: no reader has {MIN_UNTIED_PAIRS} untied pairs ({})",
            detail.join(", ")
        )));
    }
    let mut jobs: Vec<(String, Vec<PairInstance>)> = eligible.into_iter().map(|(r, p)| (r, p.clone())).collect();
    match consensus_pairs(&pairs) {
        Ok(c) if count_pairs(&c) >= MIN_UNTIED_PAIRS => jobs.push((CONSENSUS_READER.to_string(), c)),
        Ok(c) => skipped.push(SkippedReader {
            reader_id: CONSENSUS_READER.into(),
            n_pairs: count_pairs(&c),
            reason: "insufficient consensus pairs".into(),
        }),
        Err(Error::InsufficientData(m)) => skipped.push(SkippedReader {
            reader_id: CONSENSUS_READER.into(),
            n_pairs: 0,
            reason: m,
        }),
        Err(e) => return Err(e),
    }

    let trained: Vec<Result<TrainedReader>> = jobs
        .par_iter()
        .map(|(reader, p)| train_one(reader, dataset_name, p, config))
        .collect();

    create_dir(&path_in(out, "models"))?;
    let mut files = vec![PROFILES_FILE.to_string(), F1_FILE.into(), CV_FILE.into(), SKIPPED_FILE.into()];
    let mut profiles = Vec::new();
    let mut f1_rows = Vec::new();
    let mut cv_rows = Vec::new();
    for ((reader, _), t) in jobs.iter().zip(trained) {
        let t = t?;
        let best = t.fit.best;
        f1_rows.push(vec![
            reader.clone(),
            t.fit.profile.n_pairs.to_string(),
            fmt_f64(t.fit.profile.test_f1),
            t.logistic_f1.map_or("NA".into(), fmt_f64),
            best.n_estimators.to_string(),
            best.max_depth.map_or("None".into(), |d| d.to_string()),
            best.min_samples_split.to_string(),
            best.min_samples_leaf.to_string(),
            best.bootstrap.to_string(),
        ]);
        for (i, cell) in t.fit.cells.iter().enumerate().filter(|(_, c)| !c.fold_f1.is_empty()) {
            cv_rows.push(vec![
                reader.clone(),
                i.to_string(),
                cell.params.n_estimators.to_string(),
                cell.params.max_depth.map_or("None".into(), |d| d.to_string()),
                cell.params.min_samples_split.to_string(),
                cell.params.min_samples_leaf.to_string(),
                cell.params.bootstrap.to_string(),
                fmt_f64(cell.mean_f1),
            ]);
        }
        let model_file = model_file_name(reader);
        write_json(&path_in(out, &model_file), &t.fit.forest)?;
        files.push(model_file);
        if reader != CONSENSUS_READER {
            profiles.push(t.fit.profile);
        }
    }
    write_jsonl(&path_in(out, PROFILES_FILE), &profiles)?;
    write_csv(
        &path_in(out, F1_FILE),
        &[
            "reader_id",
            "n_pairs",
            "forest_f1",
            "logistic_f1",
            "n_estimators",
            "max_depth",
            "min_samples_split",
            "min_samples_leaf",
            "bootstrap",
        ],
        &f1_rows,
    )?;
    write_csv(
        &path_in(out, CV_FILE),
        &[
            "reader_id",
            "cell",
            "n_estimators",
            "max_depth",
            "min_samples_split",
            "min_samples_leaf",
            "bootstrap",
            "mean_cv_f1",
        ],
        &cv_rows,
    )?;
    write_jsonl(&path_in(out, SKIPPED_FILE), &skipped)?;
    Ok(files)
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RedundancyOutput {
    threshold: f64,
    zero_variance: Vec<String>,
    pairs: Vec<crate::analysis::RedundantPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PcaSummary {
    standardize: bool,
    n_texts: usize,
    explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Rates {
    /// Percentage of AI wins over all readers; `None` without comparable pairs.
    dataset: Option<f64>,
    per_reader: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusterSummary {
    k: usize,
    selected_by_silhouette: bool,
    silhouettes: Vec<(usize, f64)>,
    inertia: f64,
}

fn padded(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(n, 0.0);
    out
}

pub fn run_analyze(dataset: &Dataset, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let features = read_features(&path_in(out, FEATURES_FILE))?;
    let profiles: Vec<ReaderProfile> = read_jsonl(&path_in(out, PROFILES_FILE))?;
    let scores = read_scores(&path_in(out, SCORES_FILE))?;
    let (centroid_ids, centroid_rows) = read_feature_csv(&path_in(out, CENTROIDS_FILE), "reader_id")?;
    let authorship = dataset.authorship();
    let mut files = Vec::new();

    // Correlation filter.
    let x = features.matrix()?;
    let corr = correlation_matrix(&x)?;
    let rows: Vec<Vec<String>> = (0..NUM_FEATURES)
        .map(|i| {
            let mut row = vec![FEATURE_NAMES[i].to_string()];
            row.extend((0..NUM_FEATURES).map(|j| corr.get(i, j).map_or("NA".into(), fmt_f64)));
            row
        })
        .collect();
    let mut header = vec!["feature"];
    header.extend(FEATURE_NAMES.iter());
    write_csv(&path_in(out, "correlation.csv"), &header, &rows)?;
    let redundancy = RedundancyOutput {
        threshold: config.redundancy_threshold,
        zero_variance: (0..NUM_FEATURES)
            .filter(|&j| corr.zero_variance[j])
            .map(|j| FEATURE_NAMES[j].to_string())
            .collect(),
        pairs: redundancy_report(&corr, &FEATURE_NAMES, config.redundancy_threshold),
    };
    write_json(&path_in(out, "redundancy.json"), &redundancy)?;
    files.extend(["correlation.csv".to_string(), "redundancy.json".into()]);

    // PCA map of texts with projected reader centroids.
    let n_components = 2.min(features.len().saturating_sub(1));
    let pca = fit_pca(&x, n_components, config.pca_standardize)?;
    let proj = pca.transform_rows(&x)?;
    let kind = |id: &str| authorship.get(id).copied().unwrap_or(AuthorKind::Human);
    let point_rows: Vec<Vec<String>> = features
        .text_ids
        .iter()
        .zip(&proj)
        .map(|(id, p)| {
            let p = padded(p, 2);
            vec![id.clone(), kind(id).to_string(), fmt_f64(p[0]), fmt_f64(p[1])]
        })
        .collect();
    write_csv(&path_in(out, "pca_points.csv"), &["text_id", "author_kind", "pc1", "pc2"], &point_rows)?;
    let loading_rows: Vec<Vec<String>> = (0..NUM_FEATURES)
        .map(|j| {
            let l: Vec<f64> = pca.components.iter().map(|c| c[j]).collect();
            let l = padded(&l, 2);
            vec![FEATURE_NAMES[j].to_string(), fmt_f64(l[0]), fmt_f64(l[1])]
        })
        .collect();
    write_csv(&path_in(out, "loadings.csv"), &["feature", "pc1", "pc2"], &loading_rows)?;
    write_json(
        &path_in(out, "pca_summary.json"),
        &PcaSummary {
            standardize: pca.standardize,
            n_texts: features.len(),
            explained_variance_ratio: pca.explained_variance_ratio.clone(),
        },
    )?;
    let mut hulls: BTreeMap<String, Vec<[f64; 2]>> = BTreeMap::new();
    for k in [AuthorKind::Human, AuthorKind::Ai] {
        let pts: Vec<(f64, f64)> = features
            .text_ids
            .iter()
            .zip(&proj)
            .filter(|(id, _)| kind(id) == k)
            .map(|(_, p)| {
                let p = padded(p, 2);
                (p[0], p[1])
            })
            .collect();
        hulls.insert(k.to_string(), convex_hull(&pts).into_iter().map(|(a, b)| [a, b]).collect());
    }
    write_json(&path_in(out, "hulls.json"), &hulls)?;

    let per_reader = reader_ai_rates(&scores, &authorship);
    let centroid_vecs: Vec<Vec<f64>> = centroid_rows.iter().map(|r| r.to_vec()).collect();
    let centroid_proj = project_centroids(&pca, &centroid_vecs)?;
    let centroid_rows_out: Vec<Vec<String>> = centroid_ids
        .iter()
        .zip(&centroid_proj)
        .map(|(id, p)| {
            let p = padded(p, 2);
            let rate = per_reader.get(id).copied().flatten();
            vec![id.clone(), fmt_f64(p[0]), fmt_f64(p[1]), rate.map_or("NA".into(), |r| fmt_f64(r / 100.0))]
        })
        .collect();
    write_csv(&path_in(out, "centroid_points.csv"), &["reader_id", "pc1", "pc2", "ai_ratio"], &centroid_rows_out)?;
    let rates = Rates {
        dataset: match ai_preference_rate(&scores, &authorship, &RateScope::Dataset) {
            Ok(r) => Some(r),
            Err(Error::InsufficientData(_)) => None,
            Err(e) => return Err(e),
        },
        per_reader,
    };
    write_json(&path_in(out, "rates.json"), &rates)?;
    files.extend(
        ["pca_points.csv", "loadings.csv", "pca_summary.json", "hulls.json", "centroid_points.csv", "rates.json"]
            .map(String::from),
    );

    // Clusters of importance vectors.
    let points: Vec<Vec<f64>> = profiles.iter().map(|p| p.importances.to_vec()).collect();
    let seed = derive_seed(config.seed, "profile-clusters");
    let (k, silhouettes, by_silhouette) = if config.k_clusters == 0 {
        let hi = config.k_range[1].min(points.len().saturating_sub(1));
        if hi < config.k_range[0] {
            return Err(Error::InsufficientData(format!(
                "{} profiles cannot be clustered over k_range {:?}",
                points.len(),
                config.k_range
            )));
        }
        let sel = select_k(&points, config.k_range[0], hi, seed, 10)?;
        (sel.k, sel.silhouettes, true)
    } else {
        if points.len() < config.k_clusters {
            return Err(Error::InsufficientData(format!(
                "{} profiles for {} clusters",
                points.len(),
                config.k_clusters
            )));
        }
        (config.k_clusters, vec![], false)
    };
    let km = kmeans(&points, k, seed, 10)?;
    let mut clustered = profiles.clone();
    for (p, &c) in clustered.iter_mut().zip(&km.assignments) {
        p.cluster = Some(c);
    }
    let cluster_rows: Vec<Vec<String>> = clustered
        .iter()
        .map(|p| vec![p.reader_id.clone(), p.dataset.clone(), p.cluster.unwrap_or(0).to_string()])
        .collect();
    write_csv(&path_in(out, "clusters.csv"), &["reader_id", "dataset", "cluster"], &cluster_rows)?;
    write_json(
        &path_in(out, "cluster_summary.json"),
        &ClusterSummary {
            k,
            selected_by_silhouette: by_silhouette,
            silhouettes,
            inertia: km.inertia,
        },
    )?;
    let membership = cluster_membership_report(&clustered, k, std::slice::from_ref(&dataset.name))?;
    let mut m_header = vec!["dataset".to_string()];
    m_header.extend((0..k).map(|c| format!("count_{c}")));
    m_header.extend((0..k).map(|c| format!("share_{c}")));
    let m_rows: Vec<Vec<String>> = membership
        .iter()
        .map(|r| {
            let mut row = vec![r.dataset.clone()];
            row.extend(r.counts.iter().map(|c| c.to_string()));
            row.extend(r.shares.iter().map(|s| fmt_f64(*s)));
            row
        })
        .collect();
    let m_header_ref: Vec<&str> = m_header.iter().map(String::as_str).collect();
    write_csv(&path_in(out, "cluster_membership.csv"), &m_header_ref, &m_rows)?;
    let importances: Vec<[f64; NUM_FEATURES]> = profiles.iter().map(|p| p.importances).collect();
    let radar = radar_table(&importances, &km.assignments, k)?;
    let ids: Vec<String> = (0..k).map(|c| c.to_string()).collect();
    write_feature_csv(&path_in(out, "radar.csv"), "cluster", &ids, &radar)?;
    files.extend(
        ["clusters.csv", "cluster_summary.json", "cluster_membership.csv", "radar.csv"].map(String::from),
    );
    Ok(files)
}

// --------------------------------------------------------------- simulate

pub fn run_simulate(spec_path: Option<&Path>, config: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let spec: ExperimentSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => ExperimentSpec::default(),
    };
    let report = run_experiment(&spec, config.seed)?;
    create_dir(out)?;
    write_json(&path_in(out, RECOVERY_FILE), &report)?;
    Ok(vec![RECOVERY_FILE.into()])
}

// --------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn manifest_file(command: &str) -> String {
    format!("manifest-{command}.json")
}

/// Writes the reproducibility manifest: seed, configuration digest and
/// SHA-256 digests of every input and output file.
pub fn write_manifest(out: &Path, command: &str, config: &RunConfig, inputs: &[PathBuf], outputs: &[String]) -> Result<String> {
    let mut input_digests = BTreeMap::new();
    for p in inputs {
        input_digests.insert(p.display().to_string(), sha256_file(p)?);
    }
    let mut output_digests = BTreeMap::new();
    for f in outputs {
        output_digests.insert(f.clone(), sha256_file(&path_in(out, f))?);
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: config.seed,
        config_hash: config.hash(),
        config: config.clone(),
        inputs: input_digests,
        outputs: output_digests,
    };
    let name = manifest_file(command);
    write_json(&path_in(out, &name), &manifest)?;
    Ok(name)
}

// ------------------------------------------------------------- validation

fn check_csv(path: &Path) -> Result<()> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    let width = reader
        .headers()
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
        .len();
    if width == 0 {
        return Err(Error::Schema(format!("{}: empty header", path.display())));
    }
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("{}:{}: {e}", path.display(), i + 2)))?;
        if rec.len() != width {
            return Err(Error::Schema(format!("{}:{}: {} fields, header has {width}", path.display(), i + 2, rec.len())));
        }
    }
    Ok(())
}

/// Re-reads every artifact and checks it against its schema.
pub fn validate_outputs(out: &Path, files: &[String]) -> Result<()> {
    for f in files {
        let p = path_in(out, f);
        let name = Path::new(f).file_name().and_then(|n| n.to_str()).unwrap_or(f);
        let schema = |e: Error| Error::Schema(format!("output {f} failed validation: {e}"));
        match name {
            FEATURES_FILE => {
                let t = read_features(&p).map_err(schema)?;
                if let Some((id, v)) = t.text_ids.iter().zip(&t.vectors).find(|(_, v)| !v.range_violations().is_empty()) {
                    return Err(Error::Schema(format!("{f}: {id}: {:?}", v.range_violations())));
                }
            }
            CENTROIDS_FILE | "radar.csv" => {
                let key = if name == CENTROIDS_FILE { "reader_id" } else { "cluster" };
                read_feature_csv(&p, key).map_err(schema)?;
            }
            SCORES_FILE => {
                for s in read_scores(&p).map_err(schema)? {
                    if !(0.0..=1.0).contains(&s.rho) {
                        return Err(Error::Schema(format!("{f}: rho {} outside [0, 1]", s.rho)));
                    }
                }
            }
            PAIRS_FILE => {
                for pi in read_jsonl::<PairInstance>(&p).map_err(schema)? {
                    if pi.label > 1 || pi.delta.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Schema(format!("{f}: invalid pair instance {:?}", pi.pair_key)));
                    }
                }
            }
            PROFILES_FILE => {
                for pr in read_jsonl::<ReaderProfile>(&p).map_err(schema)? {
                    pr.validate().map_err(schema)?;
                }
            }
            _ if name.ends_with(".csv") => check_csv(&p)?,
            _ if name.ends_with(".jsonl") => {
                read_jsonl::<serde_json::Value>(&p).map_err(schema)?;
            }
            _ if name.ends_with(".json") => {
                read_json::<serde_json::Value>(&p).map_err(schema)?;
            }
            _ => return Err(Error::Schema(format!("unknown artifact type {f}"))),
        }
    }
    Ok(())
}
