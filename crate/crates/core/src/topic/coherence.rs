//! NPMI topic coherence with section-level co-occurrence windows.

use std::collections::HashSet;

use super::lda::LdaModel;

pub const TOP_WORDS: usize = 10;

/// Normalized PMI of two words from document frequencies over `m` windows.
fn npmi(df_i: usize, df_j: usize, df_ij: usize, m: usize) -> f64 {
    if df_ij == 0 {
        return -1.0;
    }
    let m = m as f64;
    let p_ij = df_ij as f64 / m;
    if p_ij >= 1.0 {
        return 1.0;
    }
    let p_i = df_i as f64 / m;
    let p_j = df_j as f64 / m;
    ((p_ij / (p_i * p_j)).ln() / -p_ij.ln()).clamp(-1.0, 1.0)
}

/// Mean pairwise NPMI of `words` over the given co-occurrence windows.
/// Words absent from every window are ignored; fewer than two remaining
/// words score 0.
pub fn words_coherence(words: &[&str], windows: &[HashSet<&str>]) -> f64 {
    let present: Vec<&str> = words
        .iter()
        .copied()
        .filter(|w| windows.iter().any(|s| s.contains(w)))
        .collect();
    if present.len() < 2 {
        return 0.0;
    }
    let df = |w: &str| windows.iter().filter(|s| s.contains(w)).count();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..present.len() {
        for j in i + 1..present.len() {
            let both = windows
                .iter()
                .filter(|s| s.contains(present[i]) && s.contains(present[j]))
                .count();
            sum += npmi(df(present[i]), df(present[j]), both, windows.len());
            pairs += 1;
        }
    }
    sum / pairs as f64
}

pub fn windows(sections: &[Vec<String>]) -> Vec<HashSet<&str>> {
    sections
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect()
}

/// Mean over topics of the NPMI coherence of each topic's top-10 words.
pub fn coherence_score(model: &LdaModel, sections: &[Vec<String>]) -> f64 {
    coherence_score_top(model, sections, TOP_WORDS)
}

pub fn coherence_score_top(model: &LdaModel, sections: &[Vec<String>], top_n: usize) -> f64 {
    let mut by_index = vec![""; model.vocabulary.len()];
    for (w, &i) in &model.vocabulary {
        by_index[i] = w.as_str();
    }
    let wins = windows(sections);
    let per_topic: Vec<f64> = (0..model.k)
        .map(|t| {
            let words: Vec<&str> = model
                .top_words(t, top_n)
                .into_iter()
                .map(|i| by_index[i])
                .collect();
            words_coherence(&words, &wins)
        })
        .collect();
    per_topic.iter().sum::<f64>() / per_topic.len() as f64
}
