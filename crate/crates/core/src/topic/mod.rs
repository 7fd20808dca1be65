//! Topic-dependent inputs of the metrics: per-text LDA over word sections,
//! topic-count selection by coherence, and theme clustering.

pub mod coherence;
pub mod lda;
pub mod themes;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{lexical_tokens, TopicOutputs};
use crate::model::AnnotationBundle;
use crate::seed::derive_seed;

pub use coherence::coherence_score;
pub use lda::{fit_lda, LdaModel, LdaParams};
pub use themes::{cluster_themes, ThemeClustering};

/// Splits tokens into `m` contiguous sections whose sizes differ by at most
/// one; the remainder goes to the earliest sections.
pub fn split_sections<T: Clone>(tokens: &[T], m: usize) -> Result<Vec<Vec<T>>> {
    let n = tokens.len();
    if m == 0 || n < m {
        return Err(Error::Invalid(format!("cannot split {n} tokens into {m} sections")));
    }
    let base = n / m;
    let extra = n % m;
    let mut out = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let len = base + usize::from(i < extra);
        out.push(tokens[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSelection {
    pub k_star: usize,
    pub model: LdaModel,
    /// Coherence per candidate K.
    pub curve: Vec<(usize, f64)>,
}

/// Fits one model per K in `[k_min, k_max]` and keeps the most coherent;
/// ties go to the smaller K.
pub fn select_topic_count(
    sections: &[Vec<String>],
    k_min: usize,
    k_max: usize,
    iterations: usize,
    seed: u64,
) -> Result<TopicSelection> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::Invalid(format!("invalid topic range [{k_min}, {k_max}]")));
    }
    let mut curve = Vec::new();
    let mut best: Option<(f64, LdaModel)> = None;
    for k in k_min..=k_max {
        let model = fit_lda(sections, &LdaParams::new(k, iterations, seed))?;
        let score = coherence_score(&model, sections);
        curve.push((k, score));
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, model));
        }
    }
    let (_, model) = best.expect("non-empty range");
    Ok(TopicSelection {
        k_star: model.k,
        model,
        curve,
    })
}

pub fn section_topic_vectors(model: &LdaModel) -> Vec<Vec<f64>> {
    model.doc_topic.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub sections: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub iterations: usize,
    pub c_min: usize,
    pub c_max: usize,
    pub tau: f64,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            sections: 10,
            k_min: 2,
            k_max: 10,
            iterations: 1000,
            c_min: 1,
            c_max: 8,
            tau: 0.5,
        }
    }
}

/// Per-text diagnostics line of the topic-diagnostics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicDiagnostics {
    pub text_id: String,
    pub k_star: usize,
    pub coherence_curve: Vec<(usize, f64)>,
    pub theme_proportions: Vec<f64>,
    pub theme_edges: usize,
}

/// Mean sentence embedding of every chunk; a sentence belongs to each chunk
/// its token range overlaps.
pub fn chunk_embeddings(bundle: &AnnotationBundle) -> Vec<Vec<f64>> {
    let mut ranges = Vec::with_capacity(bundle.sentences.len());
    let mut acc = 0;
    for s in &bundle.sentences {
        ranges.push((acc, acc + s.tokens.len()));
        acc += s.tokens.len();
    }
    let dim = bundle.sentences.first().map_or(0, |s| s.embedding.len());
    bundle
        .chunks
        .iter()
        .filter_map(|c| {
            let [start, end] = c.token_span;
            let members: Vec<&Vec<f64>> = bundle
                .sentences
                .iter()
                .zip(&ranges)
                .filter(|(_, &(s, e))| s < end && start < e)
                .map(|(sent, _)| &sent.embedding)
                .collect();
            if members.is_empty() {
                return None;
            }
            let mut mean = vec![0.0; dim];
            for m in &members {
                for (acc, v) in mean.iter_mut().zip(m.iter()) {
                    *acc += v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= members.len() as f64);
            Some(mean)
        })
        .collect()
}

/// Runs the per-text topic pipeline: word sections, LDA with coherence-based
/// K selection, and theme clusters over chunk embeddings.
pub fn fit_text_topics(
    bundle: &AnnotationBundle,
    config: &TopicConfig,
    master_seed: u64,
) -> Result<(TopicOutputs, TopicDiagnostics)> {
    let tokens = lexical_tokens(bundle);
    if tokens.is_empty() {
        return Err(Error::metric("topic_count", "no word tokens"));
    }
    let m = config.sections.min(tokens.len());
    let sections = split_sections(&tokens, m)?;
    let seed = derive_seed(master_seed, &format!("lda:{}", bundle.text_id));
    let selection = select_topic_count(&sections, config.k_min, config.k_max, config.iterations, seed)?;

    let segments = chunk_embeddings(bundle);
    let theme_seed = derive_seed(master_seed, &format!("themes:{}", bundle.text_id));
    let themes = if segments.is_empty() {
        ThemeClustering {
            c: 1,
            assignments: vec![],
            proportions: vec![1.0],
            edges: 0,
            silhouettes: vec![],
        }
    } else {
        cluster_themes(&segments, (config.c_min, config.c_max), config.tau, theme_seed)?
    };

    let outputs = TopicOutputs {
        k_star: selection.k_star,
        section_topic_vectors: section_topic_vectors(&selection.model),
        theme_proportions: themes.proportions.clone(),
        theme_graph: themes.graph(),
    };
    let diagnostics = TopicDiagnostics {
        text_id: bundle.text_id.clone(),
        k_star: selection.k_star,
        coherence_curve: selection.curve,
        theme_proportions: themes.proportions,
        theme_edges: themes.edges,
    };
    Ok((outputs, diagnostics))
}
