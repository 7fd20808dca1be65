//! Intercept-free logistic regression on pair deltas, fitted by FISTA.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NUM_FEATURES;

pub const C_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
const MAX_ITER: usize = 5000;
const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub c: f64,
    pub penalty: Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub params: LogisticParams,
    pub weights: [f64; NUM_FEATURES],
    pub iterations: usize,
}

impl LogisticModel {
    pub fn decision(&self, x: &[f64; NUM_FEATURES]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    pub fn predict_proba(&self, x: &[f64; NUM_FEATURES]) -> f64 {
        1.0 / (1.0 + (-self.decision(x)).exp())
    }

    /// Positive iff the decision value is strictly positive.
    pub fn predict_label(&self, x: &[f64; NUM_FEATURES]) -> u8 {
        u8::from(self.decision(x) > 0.0)
    }
}

/// Numerically stable `log(1 + exp(-m))`.
fn log_loss(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Objective `C * sum log(1 + exp(-s_i w.x_i)) + R(w)` with `R = ||w||^2 / 2`
/// (L2) or `||w||_1` (L1), in the original feature scale.
pub fn objective(x: &[[f64; NUM_FEATURES]], y: &[u8], w: &[f64; NUM_FEATURES], p: &LogisticParams) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let s = if yi == 1 { 1.0 } else { -1.0 };
            log_loss(s * xi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
        })
        .sum();
    let reg = match p.penalty {
        Penalty::L2 => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        Penalty::L1 => w.iter().map(|v| v.abs()).sum(),
    };
    p.c * loss + reg
}

pub fn fit_logistic(x: &[[f64; NUM_FEATURES]], y: &[u8], params: &LogisticParams) -> Result<LogisticModel> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::InsufficientData("no training instances".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Invalid(format!("C must be positive, got {}", params.c)));
    }
    let n = x.len();
    // Column scaling by RMS conditions the problem; the penalty stays on
    // the original weights, handled through the scaled coordinates.
    let mut scale = [0.0; NUM_FEATURES];
    for row in x {
        for (s, v) in scale.iter_mut().zip(row) {
            *s += v * v;
        }
    }
    let scale = scale.map(|s| {
        let r = (s / n as f64).sqrt();
        if r > 0.0 {
            r
        } else {
            1.0
        }
    });
    let z: Vec<[f64; NUM_FEATURES]> = x.iter().map(|r| std::array::from_fn(|j| r[j] / scale[j])).collect();
    let sign: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    let gram = DMatrix::from_fn(NUM_FEATURES, NUM_FEATURES, |a, b| z.iter().map(|r| r[a] * r[b]).sum::<f64>());
    let lmax = SymmetricEigen::new(gram).eigenvalues.max().max(0.0);
    // Penalty on u = w * scale: L2 term 0.5 * sum (u_j / scale_j)^2, L1 term sum |u_j| / scale_j.
    let inv2: [f64; NUM_FEATURES] = scale.map(|s| 1.0 / (s * s));
    let l2_curv = match params.penalty {
        Penalty::L2 => inv2.iter().cloned().fold(0.0, f64::max),
        Penalty::L1 => 0.0,
    };
    let lipschitz = (params.c * lmax / 4.0 + l2_curv).max(1e-12);
    let step = 1.0 / lipschitz;

    let grad = |u: &[f64; NUM_FEATURES]| -> [f64; NUM_FEATURES] {
        let mut g = [0.0; NUM_FEATURES];
        for (zi, &si) in z.iter().zip(&sign) {
            let m = si * zi.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
            let coef = -si * sigmoid(-m) * params.c;
            for (gj, zj) in g.iter_mut().zip(zi) {
                *gj += coef * zj;
            }
        }
        if params.penalty == Penalty::L2 {
            for j in 0..NUM_FEATURES {
                g[j] += u[j] * inv2[j];
            }
        }
        g
    };

    let mut u = [0.0; NUM_FEATURES];
    let mut v = u;
    let mut t = 1.0f64;
    let mut iterations = MAX_ITER;
    for it in 0..MAX_ITER {
        let g = grad(&v);
        let mut next: [f64; NUM_FEATURES] = std::array::from_fn(|j| v[j] - step * g[j]);
        if params.penalty == Penalty::L1 {
            for j in 0..NUM_FEATURES {
                let thr = step / scale[j];
                next[j] = next[j].signum() * (next[j].abs() - thr).max(0.0);
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        let diff: f64 = next.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = std::array::from_fn(|j| next[j] + mom * (next[j] - u[j]));
        u = next;
        t = t_next;
        if diff <= TOL * norm.max(1.0) {
            iterations = it + 1;
            break;
        }
    }
    Ok(LogisticModel {
        params: *params,
        weights: std::array::from_fn(|j| u[j] / scale[j]),
        iterations,
    })
}
