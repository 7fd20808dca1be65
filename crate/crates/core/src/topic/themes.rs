//! Theme clusters over segment embeddings and the theme similarity graph.

use serde::{Deserialize, Serialize};

use crate::analysis::cluster::{kmeans, silhouette};
use crate::error::{Error, Result};
use crate::metrics::cosine;

const N_INIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeClustering {
    pub c: usize,
    pub assignments: Vec<usize>,
    pub proportions: Vec<f64>,
    /// Pairs of themes whose centroid cosine reaches the threshold.
    pub edges: usize,
    pub silhouettes: Vec<(usize, f64)>,
}

impl ThemeClustering {
    fn single(n: usize, silhouettes: Vec<(usize, f64)>) -> Self {
        Self {
            c: 1,
            assignments: vec![0; n],
            proportions: vec![1.0],
            edges: 0,
            silhouettes,
        }
    }

    pub fn graph(&self) -> (usize, usize) {
        (self.c, self.edges)
    }
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Clusters segments into themes. The cluster count is the silhouette
/// maximizer over `c_range` (restricted to C >= 2); a single theme is used
/// for fewer than three segments, for segments without separation, and when
/// no multi-theme split reaches a positive silhouette.
pub fn cluster_themes(
    embeddings: &[Vec<f64>],
    c_range: (usize, usize),
    tau: f64,
    seed: u64,
) -> Result<ThemeClustering> {
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::Invalid("no segment embeddings".into()));
    }
    let distinct = distinct_count(embeddings);
    if n < 3 || distinct < 2 {
        return Ok(ThemeClustering::single(n, vec![]));
    }
    let lo = c_range.0.max(2);
    let hi = c_range.1.min(n - 1).min(distinct);
    let mut silhouettes = Vec::new();
    let mut best: Option<(usize, f64, Vec<usize>, Vec<Vec<f64>>)> = None;
    for c in lo..=hi {
        let km = kmeans(embeddings, c, seed, N_INIT)?;
        let s = silhouette(embeddings, &km.assignments).unwrap_or(0.0);
        silhouettes.push((c, s));
        if best.as_ref().is_none_or(|b| s > b.1) {
            best = Some((c, s, km.assignments, km.centroids));
        }
    }
    let Some((c, s, assignments, centroids)) = best else {
        return Ok(ThemeClustering::single(n, silhouettes));
    };
    if s <= 0.0 {
        return Ok(ThemeClustering::single(n, silhouettes));
    }
    let mut counts = vec![0usize; c];
    for &a in &assignments {
        counts[a] += 1;
    }
    let proportions = counts.iter().map(|&k| k as f64 / n as f64).collect();
    let mut edges = 0;
    for i in 0..c {
        for j in i + 1..c {
            if cosine(&centroids[i], &centroids[j]) >= tau {
                edges += 1;
            }
        }
    }
    Ok(ThemeClustering {
        c,
        assignments,
        proportions,
        edges,
        silhouettes,
    })
}
