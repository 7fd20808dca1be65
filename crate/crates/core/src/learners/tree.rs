//! Binary CART classification tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::NUM_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
}

/// Tree node in the portable model format. Children are indices into the
/// node list; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        impurity: f64,
    },
    Leaf {
        /// Class distribution `[p(label 0), p(label 1)]`.
        distribution: [f64; 2],
        n_samples: usize,
        impurity: f64,
    },
}

impl Node {
    fn n_samples(&self) -> usize {
        match self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples,
        }
    }

    fn impurity(&self) -> f64 {
        match self {
            Node::Split { impurity, .. } | Node::Leaf { impurity, .. } => *impurity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

/// Gini impurity of a binary node with `n` samples, `pos` of them positive.
pub fn gini(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

struct Candidate {
    feature: usize,
    threshold: f64,
    proxy: f64,
}

fn best_split_on(
    x: &[[f64; NUM_FEATURES]],
    y: &[u8],
    samples: &[usize],
    feature: usize,
    min_leaf: usize,
    buf: &mut Vec<(f64, u8)>,
) -> Option<Candidate> {
    buf.clear();
    buf.extend(samples.iter().map(|&i| (x[i][feature], y[i])));
    buf.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = buf.len();
    if buf[0].0 == buf[n - 1].0 {
        return None;
    }
    let total_pos: usize = buf.iter().filter(|s| s.1 == 1).count();
    let mut left_pos = 0usize;
    let mut best: Option<Candidate> = None;
    for i in 1..n {
        left_pos += usize::from(buf[i - 1].1 == 1);
        if buf[i].0 == buf[i - 1].0 || i < min_leaf || n - i < min_leaf {
            continue;
        }
        let nl = i as f64;
        let nr = (n - i) as f64;
        let pl = left_pos as f64;
        let pr = (total_pos - left_pos) as f64;
        // Larger is better; equals n times the weighted child purity.
        let proxy = (pl * pl + (nl - pl) * (nl - pl)) / nl + (pr * pr + (nr - pr) * (nr - pr)) / nr;
        if best.as_ref().is_none_or(|b| proxy > b.proxy) {
            let (a, b) = (buf[i - 1].0, buf[i].0);
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b || !threshold.is_finite() {
                threshold = a;
            }
            best = Some(Candidate {
                feature,
                threshold,
                proxy,
            });
        }
    }
    best
}

impl Tree {
    /// Grows a tree on the (possibly repeated) sample indices.
    pub fn fit(x: &[[f64; NUM_FEATURES]], y: &[u8], samples: Vec<usize>, params: &TreeParams, rng: &mut impl Rng) -> Tree {
        let mut nodes: Vec<Node> = Vec::new();
        let mut buf = Vec::with_capacity(samples.len());
        let mut features: Vec<usize> = (0..NUM_FEATURES).collect();
        // (samples, depth, slot in parent to patch)
        let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(samples, 0, None)];
        while let Some((idx, depth, parent)) = stack.pop() {
            let n = idx.len();
            let pos = idx.iter().filter(|&&i| y[i] == 1).count();
            let impurity = gini(n, pos);
            let this = nodes.len();
            if let Some((p, is_left)) = parent {
                if let Node::Split { left, right, .. } = &mut nodes[p] {
                    if is_left {
                        *left = this;
                    } else {
                        *right = this;
                    }
                }
            }

            let can_split = impurity > 0.0
                && params.max_depth.is_none_or(|d| depth < d)
                && n >= params.min_samples_split
                && n >= 2 * params.min_samples_leaf;
            let mut best: Option<Candidate> = None;
            if can_split {
                features.shuffle(rng);
                let mut visited = 0;
                for &f in &features {
                    if visited >= params.features_per_split && best.is_some() {
                        break;
                    }
                    let constant = {
                        let first = x[idx[0]][f];
                        idx.iter().all(|&i| x[i][f] == first)
                    };
                    if constant {
                        continue;
                    }
                    visited += 1;
                    if let Some(c) = best_split_on(x, y, &idx, f, params.min_samples_leaf, &mut buf) {
                        if best.as_ref().is_none_or(|b| c.proxy > b.proxy) {
                            best = Some(c);
                        }
                    }
                }
            }

            match best {
                Some(c) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][c.feature] <= c.threshold);
                    nodes.push(Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: usize::MAX,
                        right: usize::MAX,
                        n_samples: n,
                        impurity,
                    });
                    stack.push((r, depth + 1, Some((this, false))));
                    stack.push((l, depth + 1, Some((this, true))));
                }
                None => {
                    let p1 = pos as f64 / n as f64;
                    nodes.push(Node::Leaf {
                        distribution: [1.0 - p1, p1],
                        n_samples: n,
                        impurity,
                    });
                }
            }
        }
        Tree { nodes }
    }

    /// Probability of label 1.
    pub fn predict_proba(&self, x: &[f64; NUM_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { distribution, .. } => return distribution[1],
            }
        }
    }

    /// Weighted impurity decrease per feature, normalized by root weight.
    pub fn impurity_decrease(&self) -> [f64; NUM_FEATURES] {
        let mut out = [0.0; NUM_FEATURES];
        let root = self.nodes.first().map_or(1, Node::n_samples) as f64;
        for node in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                n_samples,
                impurity,
                ..
            } = node
            {
                let (l, r) = (&self.nodes[*left], &self.nodes[*right]);
                let dec = *n_samples as f64 * impurity
                    - l.n_samples() as f64 * l.impurity()
                    - r.n_samples() as f64 * r.impurity();
                out[*feature] += dec / root;
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}
