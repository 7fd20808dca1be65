//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaParams {
    pub k: usize,
    pub iterations: usize,
    /// Symmetric document-topic prior; `None` means 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize, iterations: usize, seed: u64) -> Self {
        Self {
            k,
            iterations,
            alpha: None,
            beta: 0.01,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub k: usize,
    /// K x V, rows sum to one.
    pub topic_word: Vec<Vec<f64>>,
    /// M x K, rows sum to one.
    pub doc_topic: Vec<Vec<f64>>,
    pub vocabulary: BTreeMap<String, usize>,
    pub seed: u64,
}

impl LdaModel {
    /// Word indices of topic `k` ordered by decreasing probability; ties by index.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<usize> {
        let row = &self.topic_word[k];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }
}

struct Counts {
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u32>,
}

impl Counts {
    fn check(&self, docs: &[Vec<usize>], z: &[Vec<usize>], k: usize, v: usize) {
        let mut dt = vec![vec![0u32; k]; docs.len()];
        let mut tw = vec![vec![0u32; v]; k];
        let mut tt = vec![0u32; k];
        for (d, doc) in docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let t = z[d][i];
                dt[d][t] += 1;
                tw[t][w] += 1;
                tt[t] += 1;
            }
        }
        assert!(
            dt == self.doc_topic && tw == self.topic_word && tt == self.topic_total,
            "Gibbs count matrices drifted from topic assignments"
        );
    }
}

pub fn fit_lda(sections: &[Vec<String>], params: &LdaParams) -> Result<LdaModel> {
    if params.k == 0 {
        return Err(Error::Invalid("LDA needs K >= 1".into()));
    }
    let mut vocabulary = BTreeMap::new();
    for tok in sections.iter().flatten() {
        vocabulary.entry(tok.clone()).or_insert(0usize);
    }
    if vocabulary.is_empty() {
        return Err(Error::Invalid("LDA input has an empty vocabulary".into()));
    }
    for (i, slot) in vocabulary.values_mut().enumerate() {
        *slot = i;
    }
    let docs: Vec<Vec<usize>> = sections
        .iter()
        .map(|s| s.iter().map(|t| vocabulary[t]).collect())
        .collect();

    let k = params.k;
    let v = vocabulary.len();
    let alpha = params.alpha();
    let beta = params.beta;
    let vbeta = v as f64 * beta;
    let mut rng = rng_from(params.seed);

    let mut counts = Counts {
        doc_topic: vec![vec![0; k]; docs.len()],
        topic_word: vec![vec![0; v]; k],
        topic_total: vec![0; k],
    };
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let mut zd = Vec::with_capacity(doc.len());
        for &w in doc {
            let t = rng.random_range(0..k);
            counts.doc_topic[d][t] += 1;
            counts.topic_word[t][w] += 1;
            counts.topic_total[t] += 1;
            zd.push(t);
        }
        z.push(zd);
    }

    let mut weights = vec![0.0; k];
    if k > 1 {
        for _ in 0..params.iterations {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let old = z[d][i];
                    counts.doc_topic[d][old] -= 1;
                    counts.topic_word[old][w] -= 1;
                    counts.topic_total[old] -= 1;

                    let mut total = 0.0;
                    for t in 0..k {
                        total += (counts.doc_topic[d][t] as f64 + alpha)
                            * (counts.topic_word[t][w] as f64 + beta)
                            / (counts.topic_total[t] as f64 + vbeta);
                        weights[t] = total;
                    }
                    let u = rng.random::<f64>() * total;
                    let new = weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                    z[d][i] = new;
                    counts.doc_topic[d][new] += 1;
                    counts.topic_word[new][w] += 1;
                    counts.topic_total[new] += 1;
                }
            }
            if cfg!(debug_assertions) {
                counts.check(&docs, &z, k, v);
            }
        }
    }

    let doc_topic = docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            let denom = doc.len() as f64 + k as f64 * alpha;
            normalize(
                (0..k)
                    .map(|t| (counts.doc_topic[d][t] as f64 + alpha) / denom)
                    .collect(),
            )
        })
        .collect();
    let topic_word = (0..k)
        .map(|t| {
            let denom = counts.topic_total[t] as f64 + vbeta;
            normalize(
                (0..v)
                    .map(|w| (counts.topic_word[t][w] as f64 + beta) / denom)
                    .collect(),
            )
        })
        .collect();

    Ok(LdaModel {
        k,
        topic_word,
        doc_topic,
        vocabulary,
        seed: params.seed,
    })
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    row
}
