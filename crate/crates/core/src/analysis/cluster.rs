//! k-means with greedy k-means++ seeding, silhouette-based k selection and
//! the adjusted Rand index.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

const MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    /// Canonical labels: cluster 0 is the largest, ties by lowest member index.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().map(Vec::len).unwrap_or(0);
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: p.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite coordinate".into()));
    }
    Ok(dim)
}

fn greedy_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut closest: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let potential: f64 = closest.iter().sum();
        let chosen = if potential <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut best: Option<(f64, usize)> = None;
            for _ in 0..trials {
                let u = rng.random::<f64>() * potential;
                let mut acc = 0.0;
                let mut cand = n - 1;
                for (i, d) in closest.iter().enumerate() {
                    acc += d;
                    if u < acc {
                        cand = i;
                        break;
                    }
                }
                let pot: f64 = points
                    .iter()
                    .zip(&closest)
                    .map(|(p, &d)| d.min(sq_dist(p, &points[cand])))
                    .sum();
                if best.is_none_or(|(b, _)| pot < b) {
                    best = Some((pot, cand));
                }
            }
            best.map(|(_, c)| c).unwrap_or(0)
        };
        for (d, p) in closest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[chosen]));
        }
        centers.push(points[chosen].clone());
    }
    centers
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (best, d) = centers
                .iter()
                .enumerate()
                .map(|(c, m)| (c, sq_dist(p, m)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            inertia += d;
            best
        })
        .collect();
    (labels, inertia)
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeans {
    let k = centers.len();
    let dim = points[0].len();
    let mut history = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..MAX_ITER {
        let (new_labels, inertia) = assign(points, &centers);
        history.push(inertia);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&labels) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Relocate empty clusters onto the points farthest from their centers.
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..points.len())
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    taken[i] = true;
                    centers[c] = points[i].clone();
                }
            }
        }
    }
    let (labels, inertia) = assign(points, &centers);
    KMeans {
        assignments: labels,
        centroids: centers,
        inertia,
        history,
    }
}

/// Old-to-new label map: largest cluster first, ties by lowest member index.
fn canonical_map(assignments: &[usize], k: usize) -> Vec<usize> {
    let mut stats: Vec<(usize, usize, usize)> = (0..k).map(|c| (0, usize::MAX, c)).collect();
    for (i, &c) in assignments.iter().enumerate() {
        stats[c].0 += 1;
        stats[c].1 = stats[c].1.min(i);
    }
    stats.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut map = vec![0; k];
    for (new, &(_, _, old)) in stats.iter().enumerate() {
        map[old] = new;
    }
    map
}

/// Relabels clusters: largest first, ties by lowest member index.
pub fn canonicalize(assignments: &[usize], k: usize) -> Vec<usize> {
    let map = canonical_map(assignments, k);
    assignments.iter().map(|&c| map[c]).collect()
}

fn canonical_result(mut km: KMeans, k: usize) -> KMeans {
    let map = canonical_map(&km.assignments, k);
    let mut centroids = km.centroids.clone();
    for (old, &new) in map.iter().enumerate() {
        centroids[new] = km.centroids[old].clone();
    }
    km.assignments = km.assignments.iter().map(|&c| map[c]).collect();
    km.centroids = centroids;
    km
}

pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, n_init: usize) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::Invalid(format!(
            "k = {k} must be between 1 and the number of points ({})",
            points.len()
        )));
    }
    check_points(points)?;
    let runs: Vec<KMeans> = (0..n_init.max(1))
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from(derive_seed(seed, &format!("kmeans-init-{i}")));
            let centers = greedy_plus_plus(points, k, &mut rng);
            lloyd(points, centers)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .expect("at least one restart");
    Ok(canonical_result(best, k))
}

/// Mean silhouette coefficient. Points in singleton clusters score 0.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    let n = points.len();
    if n != assignments.len() {
        return Err(Error::Dimension {
            expected: n,
            got: assignments.len(),
        });
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::Invalid("silhouette needs at least two non-empty clusters".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let ci = assignments[i];
        if sizes[ci] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[assignments[j]] += sq_dist(&points[i], &points[j]).sqrt();
            }
        }
        let a = sums[ci] / (sizes[ci] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != ci && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub k: usize,
    /// Mean silhouette per candidate k.
    pub silhouettes: Vec<(usize, f64)>,
}

/// Picks the k in `k_min..=k_max` maximizing mean silhouette; ties go to the
/// smaller k.
pub fn select_k(points: &[Vec<f64>], k_min: usize, k_max: usize, seed: u64, n_init: usize) -> Result<KSelection> {
    if k_min < 2 || k_min > k_max || k_max + 1 > points.len() {
        return Err(Error::Invalid(format!(
            "k range [{k_min}, {k_max}] must lie within [2, {}]",
            points.len().saturating_sub(1)
        )));
    }
    let mut silhouettes = Vec::new();
    let mut best = (k_min, f64::NEG_INFINITY);
    for k in k_min..=k_max {
        let km = kmeans(points, k, seed, n_init)?;
        let s = silhouette(points, &km.assignments).unwrap_or(0.0);
        silhouettes.push((k, s));
        if s > best.1 {
            best = (k, s);
        }
    }
    Ok(KSelection { k: best.0, silhouettes })
}

fn comb2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
