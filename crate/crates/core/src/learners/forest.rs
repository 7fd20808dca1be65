//! Random forest over pair deltas, with MDI importances and pairwise
//! preference prediction.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureVector, PairInstance, NUM_FEATURES};
use crate::seed::{derive_seed, rng_from};

use super::tree::{Tree, TreeParams};

pub const DEFAULT_FEATURES_PER_SPLIT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyperparams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub features_per_split: usize,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            features_per_split: DEFAULT_FEATURES_PER_SPLIT,
        }
    }
}

impl ForestHyperparams {
    fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Invalid("n_estimators must be positive".into()));
        }
        if self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(Error::Invalid("min_samples_split >= 2 and min_samples_leaf >= 1 required".into()));
        }
        if self.features_per_split == 0 || self.features_per_split > NUM_FEATURES {
            return Err(Error::Invalid(format!(
                "features_per_split must be in [1, {NUM_FEATURES}]"
            )));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub hyperparams: ForestHyperparams,
    pub seed: u64,
    pub importances: [f64; NUM_FEATURES],
    /// Set when no tree split at all, so importances are uniform.
    pub uniform_fallback: bool,
    pub trees: Vec<Tree>,
}

/// Splits pair instances into design matrix rows and labels.
pub fn design(pairs: &[PairInstance]) -> (Vec<[f64; NUM_FEATURES]>, Vec<u8>) {
    pairs.iter().map(|p| (p.delta, p.label)).unzip()
}

pub fn train_forest(pairs: &[PairInstance], hp: &ForestHyperparams, seed: u64) -> Result<TrainedForest> {
    let (x, y) = design(pairs);
    train_forest_xy(&x, &y, hp, seed)
}

pub fn train_forest_xy(x: &[[f64; NUM_FEATURES]], y: &[u8], hp: &ForestHyperparams, seed: u64) -> Result<TrainedForest> {
    hp.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no training instances".into()));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    let n = x.len();
    let params = hp.tree_params();
    let trees: Vec<Tree> = (0..hp.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(derive_seed(seed, &format!("tree-{i}")));
            let samples: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            Tree::fit(x, y, samples, &params, &mut rng)
        })
        .collect();
    let (importances, uniform_fallback) = mdi(&trees);
    Ok(TrainedForest {
        hyperparams: *hp,
        seed,
        importances,
        uniform_fallback,
        trees,
    })
}

/// Mean of per-tree impurity decreases, normalized to sum to one.
fn mdi(trees: &[Tree]) -> ([f64; NUM_FEATURES], bool) {
    let mut acc = [0.0; NUM_FEATURES];
    for t in trees {
        for (a, d) in acc.iter_mut().zip(t.impurity_decrease()) {
            *a += d;
        }
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return ([1.0 / NUM_FEATURES as f64; NUM_FEATURES], true);
    }
    (acc.map(|a| a / total), false)
}

impl TrainedForest {
    pub fn mdi_importances(&self) -> ([f64; NUM_FEATURES], bool) {
        (self.importances, self.uniform_fallback)
    }

    /// Mean positive-class probability over trees.
    pub fn predict_proba(&self, delta: &[f64; NUM_FEATURES]) -> f64 {
        self.trees.iter().map(|t| t.predict_proba(delta)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict_label(&self, delta: &[f64; NUM_FEATURES]) -> u8 {
        u8::from(self.predict_proba(delta) > 0.5)
    }

    /// Probability that text `a` is preferred over text `b`. Averages both
    /// orientations, so `predict_pair(a, b) + predict_pair(b, a) == 1` exactly.
    pub fn predict_pair(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        let r = self.predict_proba(&a.sub(b)) - self.predict_proba(&b.sub(a));
        // Build the larger side and derive the other by subtraction; 1 - v
        // is exact for v in [0.5, 1].
        let v = 0.5 * (1.0 + r.abs());
        if r >= 0.0 {
            v
        } else {
            1.0 - v
        }
    }
}
