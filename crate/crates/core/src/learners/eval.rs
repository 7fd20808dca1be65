//! Group-aware splitting, cross-validated grid search and F1.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PairInstance, PairKey, NUM_FEATURES};
use crate::seed::{derive_seed, rng_from};

/// F1 of the positive class; 0 when there are no true positives.
pub fn f1_score(y_true: &[u8], y_pred: &[u8]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub folds: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            folds: 3,
        }
    }
}

fn groups_of(pairs: &[PairInstance], indices: &[usize]) -> BTreeMap<PairKey, Vec<usize>> {
    let mut groups: BTreeMap<PairKey, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        groups.entry(pairs[i].pair_key.clone()).or_default().push(i);
    }
    groups
}

/// Splits instance indices into train and test so that both orientations of
/// a pair land on the same side.
pub fn group_split(pairs: &[PairInstance], config: &SplitConfig, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let all: Vec<usize> = (0..pairs.len()).collect();
    let groups = groups_of(pairs, &all);
    let n = groups.len();
    if n < config.folds + 1 {
        return Err(Error::InsufficientData(format!(
            "{n} pairs cannot be split into a test set and {} folds",
            config.folds
        )));
    }
    let n_test = ((config.test_fraction * n as f64).round() as usize).clamp(1, n - config.folds);
    let mut keys: Vec<&PairKey> = groups.keys().collect();
    keys.shuffle(&mut rng_from(derive_seed(seed, "group-split")));
    let test_keys: BTreeSet<&PairKey> = keys[..n_test].iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (k, idx) in &groups {
        if test_keys.contains(k) {
            test.extend(idx);
        } else {
            train.extend(idx);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Assigns the groups among `indices` round-robin to `folds` folds after a
/// seeded shuffle. Returns the instance indices per fold.
pub fn group_folds(pairs: &[PairInstance], indices: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let groups = groups_of(pairs, indices);
    let mut keys: Vec<&PairKey> = groups.keys().collect();
    keys.shuffle(&mut rng_from(derive_seed(seed, "group-folds")));
    let mut out = vec![Vec::new(); folds];
    for (i, k) in keys.iter().enumerate() {
        out[i % folds].extend(&groups[*k]);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    out
}

fn subset(pairs: &[PairInstance], idx: &[usize]) -> Vec<PairInstance> {
    idx.iter().map(|&i| pairs[i].clone()).collect()
}

pub fn evaluate_f1<M>(model: &M, pairs: &[PairInstance], predict: impl Fn(&M, &[f64; NUM_FEATURES]) -> u8) -> f64 {
    let y: Vec<u8> = pairs.iter().map(|p| p.label).collect();
    let pred: Vec<u8> = pairs.iter().map(|p| predict(model, &p.delta)).collect();
    f1_score(&y, &pred)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore<P> {
    pub params: P,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone)]
pub struct GridResult<P, M> {
    pub best_index: usize,
    pub cells: Vec<CellScore<P>>,
    /// Model refitted on the full training split with the best cell.
    pub model: M,
    pub test_f1: f64,
    pub n_train: usize,
    pub n_test: usize,
}

impl<P, M> GridResult<P, M> {
    pub fn best(&self) -> &P {
        &self.cells[self.best_index].params
    }
}

/// Selects the cell with the best mean inner-CV F1 (first cell on ties),
/// refits it on the training split and scores it on the held-out split.
/// A fold whose training part holds one class scores 0.
pub fn grid_search<P, M, F, G>(
    pairs: &[PairInstance],
    cells: &[P],
    config: &SplitConfig,
    seed: u64,
    fit: F,
    predict: G,
) -> Result<GridResult<P, M>>
where
    P: Clone + Sync + Send,
    M: Send,
    F: Fn(&[PairInstance], &P, u64) -> Result<M> + Sync,
    G: Fn(&M, &[f64; NUM_FEATURES]) -> u8 + Sync,
{
    if cells.is_empty() {
        return Err(Error::Invalid("empty hyperparameter grid".into()));
    }
    let (train_idx, test_idx) = group_split(pairs, config, seed)?;
    let folds = group_folds(pairs, &train_idx, config.folds, seed);
    let fold_sets: Vec<(Vec<PairInstance>, Vec<PairInstance>)> = (0..config.folds)
        .map(|k| {
            let fit_idx: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (subset(pairs, &fit_idx), subset(pairs, &folds[k]))
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..config.folds).map(move |k| (c, k))).collect();
    let scores: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, k)| {
            let (fit_set, val_set) = &fold_sets[k];
            match fit(fit_set, &cells[c], derive_seed(seed, &format!("cv-{k}"))) {
                Ok(m) => Ok(evaluate_f1(&m, val_set, &predict)),
                Err(Error::SingleClass) => Ok(0.0),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut table: Vec<CellScore<P>> = cells
        .iter()
        .map(|p| CellScore {
            params: p.clone(),
            fold_f1: Vec::with_capacity(config.folds),
            mean_f1: 0.0,
        })
        .collect();
    for (&(c, _), s) in jobs.iter().zip(scores) {
        table[c].fold_f1.push(s?);
    }
    for cell in table.iter_mut() {
        cell.mean_f1 = cell.fold_f1.iter().sum::<f64>() / config.folds as f64;
    }
    let mut best_index = 0;
    for i in 1..table.len() {
        if table[i].mean_f1 > table[best_index].mean_f1 {
            best_index = i;
        }
    }

    let train = subset(pairs, &train_idx);
    let test = subset(pairs, &test_idx);
    let model = fit(&train, &table[best_index].params, derive_seed(seed, "final"))?;
    let test_f1 = evaluate_f1(&model, &test, &predict);
    Ok(GridResult {
        best_index,
        cells: table,
        model,
        test_f1,
        n_train: train.len(),
        n_test: test.len(),
    })
}
