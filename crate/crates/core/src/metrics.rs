//! The 17 reference-less text metrics.
//!
//! Every metric reads an [`AnnotationBundle`] (and, for the topic features,
//! the outputs of the per-text topic model) through a [`MetricContext`].
//! Tokenization is taken from the bundle as is; nothing here re-tokenizes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnnotationBundle, Feature, FeatureVector, Role, TextRecord, NUM_FEATURES};

pub const MTLD_THRESHOLD: f64 = 0.72;
const SMOG_SAMPLE: usize = 30;

/// Topic-model outputs needed by the thematic and global-coherence metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicOutputs {
    pub k_star: usize,
    pub section_topic_vectors: Vec<Vec<f64>>,
    pub theme_proportions: Vec<f64>,
    /// Theme graph as (nodes, edges).
    pub theme_graph: (usize, usize),
}

impl TopicOutputs {
    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.section_topic_vectors.iter().enumerate() {
            let s: f64 = t.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("section topic vector {i} sums to {s}")));
            }
        }
        let s: f64 = self.theme_proportions.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("theme proportions sum to {s}")));
        }
        let (v, e) = self.theme_graph;
        if e > max_edges(v) {
            return Err(Error::Invalid(format!("{e} edges exceed the maximum for {v} nodes")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MetricContext<'a> {
    pub bundle: &'a AnnotationBundle,
    pub topics: Option<&'a TopicOutputs>,
}

impl<'a> MetricContext<'a> {
    pub fn new(bundle: &'a AnnotationBundle, topics: Option<&'a TopicOutputs>) -> Self {
        Self { bundle, topics }
    }

    fn sentence_lengths(&self) -> Vec<f64> {
        self.bundle.sentences.iter().map(|s| s.tokens.len() as f64).collect()
    }

    fn require_sentences(&self, metric: &'static str, min: usize) -> Result<()> {
        let n = self.bundle.sentences.len();
        if n < min {
            return Err(Error::metric(metric, format!("needs at least {min} sentence(s), found {n}")));
        }
        Ok(())
    }

    fn topics(&self, metric: &'static str) -> Result<&'a TopicOutputs> {
        self.topics
            .ok_or_else(|| Error::metric(metric, "topic-model outputs are missing"))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divisor n).
fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

fn max_edges(v: usize) -> usize {
    v * v.saturating_sub(1) / 2
}

pub fn avg_sentence_length(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("sentence_length", 1)?;
    Ok(mean(&ctx.sentence_lengths()))
}

pub fn sentence_rhythm(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("sentence_rhythm", 1)?;
    Ok(population_variance(&ctx.sentence_lengths()).sqrt())
}

pub fn avg_syntactic_depth(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("syntactic_depth", 1)?;
    let depths: Vec<f64> = ctx.bundle.sentences.iter().map(|s| s.parse_depth as f64).collect();
    Ok(mean(&depths))
}

pub fn max_subordination(ctx: &MetricContext) -> Result<u32> {
    ctx.require_sentences("max_subordination", 1)?;
    Ok(ctx
        .bundle
        .sentences
        .iter()
        .map(|s| s.subordination_depth)
        .max()
        .unwrap_or(0))
}

/// Detailed MTLD result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mtld {
    pub value: f64,
    pub forward: f64,
    pub backward: f64,
    /// A direction completed no factor and fell back to N.
    pub fallback: bool,
}

fn mtld_direction<'a>(tokens: impl Iterator<Item = &'a str>, n: usize) -> (f64, bool) {
    let mut factors = 0.0;
    let mut types = std::collections::HashSet::new();
    let mut count = 0usize;
    for tok in tokens {
        types.insert(tok);
        count += 1;
        let ttr = types.len() as f64 / count as f64;
        if ttr < MTLD_THRESHOLD {
            factors += 1.0;
            types.clear();
            count = 0;
        }
    }
    if count > 0 {
        let ttr = types.len() as f64 / count as f64;
        factors += (1.0 - ttr) / (1.0 - MTLD_THRESHOLD);
    }
    if factors == 0.0 {
        (n as f64, true)
    } else {
        (n as f64 / factors, false)
    }
}

/// Bidirectional MTLD over an explicit token stream.
pub fn mtld_tokens(tokens: &[&str]) -> Result<Mtld> {
    if tokens.is_empty() {
        return Err(Error::metric("mtld", "no tokens"));
    }
    let n = tokens.len();
    let (forward, ff) = mtld_direction(tokens.iter().copied(), n);
    let (backward, bf) = mtld_direction(tokens.iter().rev().copied(), n);
    Ok(Mtld {
        value: (forward + backward) / 2.0,
        forward,
        backward,
        fallback: ff || bf,
    })
}

/// Word tokens used by the lexical metrics: lowercased, punctuation-only
/// tokens dropped.
pub fn lexical_tokens(bundle: &AnnotationBundle) -> Vec<String> {
    bundle
        .tokens()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .map(str::to_lowercase)
        .collect()
}

pub fn mtld_detail(ctx: &MetricContext) -> Result<Mtld> {
    let owned = lexical_tokens(ctx.bundle);
    let tokens: Vec<&str> = owned.iter().map(String::as_str).collect();
    mtld_tokens(&tokens)
}

pub fn mtld(ctx: &MetricContext) -> Result<f64> {
    mtld_detail(ctx).map(|m| m.value)
}

/// Rule-based English syllable estimate: vowel groups, minus a silent final
/// `e`, at least one for any word containing a letter.
pub fn count_syllables(word: &str) -> u32 {
    let w: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if w.is_empty() {
        return 0;
    }
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0u32;
    let mut prev = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if groups > 1 && w[n - 1] == 'e' && !is_vowel(w[n - 2]) {
        // "-le" after a consonant is its own syllable (table, little).
        let syllabic_le = n >= 3 && w[n - 2] == 'l' && !is_vowel(w[n - 3]);
        if !syllabic_le {
            groups -= 1;
        }
    }
    if n > 2 && w[n - 2..] == ['e', 'd'] && groups > 1 && !matches!(w[n - 3], 't' | 'd') && !is_vowel(w[n - 3]) {
        groups -= 1;
    }
    groups.max(1)
}

/// SMOG grade from polysyllable count and sampled sentence count.
pub fn smog_formula(polysyllables: usize, sampled_sentences: usize) -> f64 {
    1.0430 * (polysyllables as f64 * SMOG_SAMPLE as f64 / sampled_sentences as f64).sqrt() + 3.1291
}

/// Sentence indices sampled for SMOG: all when there are at most 30,
/// otherwise the first, middle and last ten.
pub fn smog_sample(n_sentences: usize) -> Vec<usize> {
    if n_sentences <= SMOG_SAMPLE {
        return (0..n_sentences).collect();
    }
    let mid = (n_sentences - 10) / 2;
    (0..10)
        .chain(mid..mid + 10)
        .chain(n_sentences - 10..n_sentences)
        .collect()
}

pub fn smog(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("smog", 1)?;
    let bundle = ctx.bundle;
    let sample = smog_sample(bundle.sentences.len());
    let mut offsets = Vec::with_capacity(bundle.sentences.len());
    let mut acc = 0;
    for s in &bundle.sentences {
        offsets.push(acc);
        acc += s.tokens.len();
    }
    let mut polysyllables = 0;
    for &i in &sample {
        let s = &bundle.sentences[i];
        for (j, tok) in s.tokens.iter().enumerate() {
            let syl = match &bundle.syllable_counts {
                Some(counts) => *counts.get(offsets[i] + j).ok_or_else(|| {
                    Error::metric("smog", "syllable_counts shorter than the token stream")
                })?,
                None => count_syllables(tok),
            };
            if syl >= 3 {
                polysyllables += 1;
            }
        }
    }
    Ok(smog_formula(polysyllables, sample.len().min(SMOG_SAMPLE)))
}

fn sentence_entities(bundle: &AnnotationBundle, i: usize) -> BTreeMap<&str, Role> {
    let mut out: BTreeMap<&str, Role> = BTreeMap::new();
    for (id, role) in &bundle.sentences[i].entities {
        out.entry(id.as_str())
            .and_modify(|r| {
                if role.rank() < r.rank() {
                    *r = *role
                }
            })
            .or_insert(*role);
    }
    out
}

pub fn entity_coherence(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("entity_coherence", 2)?;
    let s = ctx.bundle.sentences.len();
    let mut total = 0.0;
    let mut prev = sentence_entities(ctx.bundle, 0);
    for j in 1..s {
        let cur = sentence_entities(ctx.bundle, j);
        let union = prev.keys().chain(cur.keys().filter(|k| !prev.contains_key(*k))).count();
        if union > 0 {
            let mut score = 0.0;
            for (e, role) in &prev {
                if let Some(r2) = cur.get(e) {
                    score += 1.0;
                    if r2 == role {
                        score += 0.5;
                    }
                }
            }
            total += score / union as f64;
        }
        prev = cur;
    }
    Ok(total / (s - 1) as f64)
}

pub fn local_coherence(ctx: &MetricContext) -> Result<f64> {
    ctx.require_sentences("local_coherence", 2)?;
    let sents = &ctx.bundle.sentences;
    let sum: f64 = sents
        .windows(2)
        .map(|w| cosine(&w[0].embedding, &w[1].embedding))
        .sum();
    Ok(sum / (sents.len() - 1) as f64)
}

pub fn global_coherence(ctx: &MetricContext) -> Result<f64> {
    let topics = ctx.topics("global_coherence")?;
    let t = &topics.section_topic_vectors;
    let m = t.len();
    if m < 2 {
        return Err(Error::metric("global_coherence", format!("needs at least 2 sections, found {m}")));
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            sum += cosine(&t[i], &t[j]);
        }
    }
    Ok(2.0 * sum / (m * (m - 1)) as f64)
}

pub fn log_likelihood(ctx: &MetricContext) -> Result<f64> {
    let lps = &ctx.bundle.token_logprobs;
    if lps.iter().any(|v| !v.is_finite()) {
        return Err(Error::metric("log_likelihood", "non-finite token logprob"));
    }
    Ok(lps.iter().sum())
}

/// Mean and population variance of chunk sentiments.
pub fn sentiment_stats(ctx: &MetricContext) -> Result<(f64, f64)> {
    let s: Vec<f64> = ctx.bundle.chunks.iter().map(|c| c.sentiment).collect();
    if s.is_empty() {
        return Err(Error::metric("sentiment_stats", "no chunks"));
    }
    Ok((mean(&s), population_variance(&s)))
}

pub fn emotional_volatility(ctx: &MetricContext) -> Result<f64> {
    let chunks = &ctx.bundle.chunks;
    if chunks.len() < 2 {
        return Err(Error::metric(
            "emotional_volatility",
            format!("needs at least 2 chunks, found {}", chunks.len()),
        ));
    }
    let changes = chunks
        .windows(2)
        .filter(|w| w[0].dominant_emotion != w[1].dominant_emotion)
        .count();
    Ok(changes as f64 / (chunks.len() - 1) as f64)
}

pub fn rhetorical_variety(ctx: &MetricContext) -> Result<u32> {
    Ok(ctx
        .bundle
        .rhetorical_device_counts
        .values()
        .filter(|&&c| c > 0)
        .count() as u32)
}

/// Normalized Shannon entropy of theme proportions; 0 for a single theme.
pub fn entropy_normalized(p: &[f64]) -> Result<f64> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.iter().any(|v| *v < 0.0) {
        return Err(Error::metric("topic_entropy", format!("proportions sum to {sum}")));
    }
    let c = p.len();
    if c <= 1 {
        return Ok(0.0);
    }
    let h: f64 = p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum();
    Ok(h / (c as f64).ln())
}

pub fn thematic_entropy(ctx: &MetricContext) -> Result<f64> {
    entropy_normalized(&ctx.topics("topic_entropy")?.theme_proportions)
}

pub fn graph_density(nodes: usize, edges: usize) -> Result<f64> {
    if edges > max_edges(nodes) {
        return Err(Error::metric(
            "topic_density",
            format!("{edges} edges exceed the maximum for {nodes} nodes"),
        ));
    }
    if nodes <= 1 {
        return Ok(0.0);
    }
    Ok(2.0 * edges as f64 / (nodes * (nodes - 1)) as f64)
}

pub fn thematic_density(ctx: &MetricContext) -> Result<f64> {
    let (v, e) = ctx.topics("topic_density")?.theme_graph;
    graph_density(v, e)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionFlags {
    pub mtld_fallback: bool,
    pub syllable_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub features: FeatureVector,
    pub flags: ExtractionFlags,
}

/// Computes the full feature vector for one text. The first failing metric
/// (in canonical order) is reported by name.
pub fn extract_features(text: &TextRecord, ctx: &MetricContext) -> Result<Extraction> {
    if ctx.bundle.text_id != text.text_id {
        return Err(Error::Invalid(format!(
            "bundle {:?} does not belong to text {:?}",
            ctx.bundle.text_id, text.text_id
        )));
    }
    let mut v = [0.0; NUM_FEATURES];
    let topics = ctx.topics("topic_count")?;
    v[Feature::TopicCount.index()] = topics.k_star as f64;
    v[Feature::EntityCoherence.index()] = entity_coherence(ctx)?;
    v[Feature::LocalCoherence.index()] = local_coherence(ctx)?;
    v[Feature::GlobalCoherence.index()] = global_coherence(ctx)?;
    v[Feature::LogLikelihood.index()] = log_likelihood(ctx)?;
    v[Feature::Smog.index()] = smog(ctx)?;
    let (mean_s, var_s) = sentiment_stats(ctx)?;
    v[Feature::MeanSentiment.index()] = mean_s;
    v[Feature::EmotionalVolatility.index()] = emotional_volatility(ctx)?;
    v[Feature::SentimentVariance.index()] = var_s;
    v[Feature::SentenceLength.index()] = avg_sentence_length(ctx)?;
    v[Feature::SyntacticDepth.index()] = avg_syntactic_depth(ctx)?;
    let m = mtld_detail(ctx)?;
    v[Feature::Mtld.index()] = m.value;
    v[Feature::MaxSubordination.index()] = max_subordination(ctx)? as f64;
    v[Feature::RhetoricalVariety.index()] = rhetorical_variety(ctx)? as f64;
    v[Feature::SentenceRhythm.index()] = sentence_rhythm(ctx)?;
    v[Feature::TopicEntropy.index()] = thematic_entropy(ctx)?;
    v[Feature::TopicDensity.index()] = thematic_density(ctx)?;

    let features = FeatureVector(v);
    if let Some(problem) = features.range_violations().into_iter().next() {
        return Err(Error::Invalid(format!("text {:?}: {problem}", text.text_id)));
    }
    Ok(Extraction {
        features,
        flags: ExtractionFlags {
            mtld_fallback: m.fallback,
            syllable_fallback: ctx.bundle.syllable_counts.is_none(),
        },
    })
}
