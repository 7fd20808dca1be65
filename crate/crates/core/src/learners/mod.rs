//! Per-reader preference learners and baselines.

pub mod eval;
pub mod forest;
pub mod logistic;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PairInstance, PairKey, ReaderProfile};
use crate::prefs::count_pairs;

pub use eval::{f1_score, grid_search, group_split, CellScore, GridResult, SplitConfig};
pub use forest::{train_forest, ForestHyperparams, TrainedForest};
pub use logistic::{fit_logistic, LogisticModel, LogisticParams, Penalty};

/// Readers with fewer untied pairs are excluded from training.
pub const MIN_UNTIED_PAIRS: usize = 10;
/// Reader id of the majority-vote baseline.
pub const CONSENSUS_READER: &str = "_consensus";

/// Cartesian hyperparameter grid for the forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub bootstrap: Vec<bool>,
    pub features_per_split: usize,
}

impl ForestGrid {
    pub fn full() -> Self {
        Self {
            n_estimators: vec![100, 200, 300],
            max_depth: vec![None, Some(10), Some(20), Some(30)],
            min_samples_split: vec![2, 5, 10],
            min_samples_leaf: vec![1, 2, 4],
            bootstrap: vec![true, false],
            features_per_split: forest::DEFAULT_FEATURES_PER_SPLIT,
        }
    }

    pub fn small() -> Self {
        Self {
            n_estimators: vec![100],
            max_depth: vec![None, Some(10)],
            min_samples_split: vec![2, 5],
            min_samples_leaf: vec![1, 2],
            bootstrap: vec![true],
            features_per_split: forest::DEFAULT_FEATURES_PER_SPLIT,
        }
    }

    pub fn cells(&self) -> Vec<ForestHyperparams> {
        let mut out = Vec::new();
        for &n_estimators in &self.n_estimators {
            for &max_depth in &self.max_depth {
                for &min_samples_split in &self.min_samples_split {
                    for &min_samples_leaf in &self.min_samples_leaf {
                        for &bootstrap in &self.bootstrap {
                            out.push(ForestHyperparams {
                                n_estimators,
                                max_depth,
                                min_samples_split,
                                min_samples_leaf,
                                bootstrap,
                                features_per_split: self.features_per_split,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TrainMode {
    Grid(ForestGrid),
    Fixed(ForestHyperparams),
}

#[derive(Debug, Clone)]
pub struct ReaderFit {
    pub profile: ReaderProfile,
    pub forest: TrainedForest,
    pub cells: Vec<CellScore<ForestHyperparams>>,
    pub best: ForestHyperparams,
}

/// Trains one reader's forest. Grid mode runs cross-validated selection;
/// fixed mode trains the given cell on the training split.
pub fn fit_reader(
    reader_id: &str,
    dataset: &str,
    pairs: &[PairInstance],
    mode: &TrainMode,
    split: &SplitConfig,
    seed: u64,
) -> Result<ReaderFit> {
    let n_pairs = count_pairs(pairs);
    if n_pairs < MIN_UNTIED_PAIRS {
        return Err(Error::InsufficientData(format!(
            "reader {reader_id} has {n_pairs} untied pairs, need {MIN_UNTIED_PAIRS}"
        )));
    }
    let cells = match mode {
        TrainMode::Grid(g) => g.cells(),
        TrainMode::Fixed(hp) => vec![*hp],
    };
    let result = if cells.len() == 1 {
        let (train_idx, test_idx) = group_split(pairs, split, seed)?;
        let train: Vec<PairInstance> = train_idx.iter().map(|&i| pairs[i].clone()).collect();
        let test: Vec<PairInstance> = test_idx.iter().map(|&i| pairs[i].clone()).collect();
        let model = train_forest(&train, &cells[0], crate::seed::derive_seed(seed, "final"))?;
        let test_f1 = eval::evaluate_f1(&model, &test, |m, d| m.predict_label(d));
        GridResult {
            best_index: 0,
            cells: vec![CellScore {
                params: cells[0],
                fold_f1: vec![],
                mean_f1: f64::NAN,
            }],
            model,
            test_f1,
            n_train: train.len(),
            n_test: test.len(),
        }
    } else {
        grid_search(pairs, &cells, split, seed, |p, hp, s| train_forest(p, hp, s), |m, d| m.predict_label(d))?
    };
    let forest = result.model;
    let profile = ReaderProfile {
        reader_id: reader_id.to_owned(),
        dataset: dataset.to_owned(),
        importances: forest.importances,
        test_f1: result.test_f1,
        n_pairs,
        cluster: None,
        uniform_fallback: forest.uniform_fallback,
    };
    let best = result.cells[result.best_index].params;
    Ok(ReaderFit {
        profile,
        forest,
        cells: result.cells,
        best,
    })
}

pub fn logistic_grid() -> Vec<LogisticParams> {
    [Penalty::L1, Penalty::L2]
        .into_iter()
        .flat_map(|penalty| logistic::C_GRID.map(|c| LogisticParams { c, penalty }))
        .collect()
}

/// Cross-validated logistic baseline over both penalties and the C grid.
pub fn fit_logistic_baseline(
    pairs: &[PairInstance],
    split: &SplitConfig,
    seed: u64,
) -> Result<GridResult<LogisticParams, LogisticModel>> {
    grid_search(
        pairs,
        &logistic_grid(),
        split,
        seed,
        |p, params, _| {
            let (x, y) = forest::design(p);
            fit_logistic(&x, &y, params)
        },
        |m, d| m.predict_label(d),
    )
}

/// Majority vote of reader labels per pair. Ties are dropped; survivors are
/// emitted as forward and mirrored instances under the consensus reader.
pub fn consensus_pairs(pairs: &[PairInstance]) -> Result<Vec<PairInstance>> {
    let mut votes: BTreeMap<&PairKey, (i64, &PairInstance)> = BTreeMap::new();
    for p in pairs.iter().filter(|p| p.forward) {
        let e = votes.entry(&p.pair_key).or_insert((0, p));
        e.0 += if p.label == 1 { 1 } else { -1 };
    }
    let mut out = Vec::new();
    for (key, (vote, inst)) in votes {
        if vote == 0 {
            continue;
        }
        let label = u8::from(vote > 0);
        out.push(PairInstance {
            reader_id: CONSENSUS_READER.into(),
            pair_key: key.clone(),
            delta: inst.delta,
            label,
            forward: true,
        });
        out.push(PairInstance {
            reader_id: CONSENSUS_READER.into(),
            pair_key: key.clone(),
            delta: inst.delta.map(|v| -v),
            label: 1 - label,
            forward: false,
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no untied consensus pairs".into()));
    }
    Ok(out)
}
