//! Shared domain types: texts, annotation bundles, evaluations, feature
//! vectors, preference scores, pair instances and reader profiles.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_jsonl;

pub const NUM_FEATURES: usize = 17;

pub const SCHEMA_VERSION: &str = "1";

/// Rhetorical device types the annotator detects.
pub const RHETORICAL_INVENTORY: [&str; 8] = [
    "anaphora",
    "epistrophe",
    "alliteration",
    "simile",
    "rhetorical_question",
    "exclamation",
    "polysyndeton",
    "parallelism",
];

/// The 17 features in canonical column order. Every emitted file and every
/// module indexes features through this enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    TopicCount = 0,
    EntityCoherence,
    LocalCoherence,
    GlobalCoherence,
    LogLikelihood,
    Smog,
    MeanSentiment,
    EmotionalVolatility,
    SentimentVariance,
    SentenceLength,
    SyntacticDepth,
    Mtld,
    MaxSubordination,
    RhetoricalVariety,
    SentenceRhythm,
    TopicEntropy,
    TopicDensity,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::TopicCount,
        Feature::EntityCoherence,
        Feature::LocalCoherence,
        Feature::GlobalCoherence,
        Feature::LogLikelihood,
        Feature::Smog,
        Feature::MeanSentiment,
        Feature::EmotionalVolatility,
        Feature::SentimentVariance,
        Feature::SentenceLength,
        Feature::SyntacticDepth,
        Feature::Mtld,
        Feature::MaxSubordination,
        Feature::RhetoricalVariety,
        Feature::SentenceRhythm,
        Feature::TopicEntropy,
        Feature::TopicDensity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Feature::ALL[i])
    }
}

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "topic_count",
    "entity_coherence",
    "local_coherence",
    "global_coherence",
    "log_likelihood",
    "smog",
    "mean_sentiment",
    "emotional_volatility",
    "sentiment_variance",
    "sentence_length",
    "syntactic_depth",
    "mtld",
    "max_subordination",
    "rhetorical_variety",
    "sentence_rhythm",
    "topic_entropy",
    "topic_density",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuthorKind {
    Human,
    Ai,
}

impl fmt::Display for AuthorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuthorKind::Human => "human",
            AuthorKind::Ai => "ai",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRecord {
    pub text_id: String,
    pub dataset: String,
    pub author_kind: AuthorKind,
    #[serde(default)]
    pub model_name: Option<String>,
    pub language: String,
    pub body: String,
}

impl TextRecord {
    pub fn validate(&self) -> Result<()> {
        if self.text_id.is_empty() {
            return Err(Error::Schema("empty text_id".into()));
        }
        if self.body.trim().is_empty() {
            return Err(Error::Schema(format!("text {:?} has an empty body", self.text_id)));
        }
        if self.author_kind == AuthorKind::Ai && self.model_name.as_deref().unwrap_or("").is_empty() {
            return Err(Error::Schema(format!(
                "AI text {:?} is missing model_name",
                self.text_id
            )));
        }
        Ok(())
    }
}

/// Grammatical role of an entity mention in the entity grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    S,
    O,
    X,
}

impl Role {
    /// Lower is more salient.
    pub(crate) fn rank(self) -> u8 {
        match self {
            Role::S => 0,
            Role::O => 1,
            Role::X => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAnnotation {
    pub tokens: Vec<String>,
    /// Edges on the longest root-to-leaf path of the dependency parse.
    pub parse_depth: u32,
    pub subordination_depth: u32,
    pub embedding: Vec<f64>,
    #[serde(default)]
    pub entities: Vec<(String, Role)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkAnnotation {
    /// Half-open token range `[start, end)` into the concatenated text.
    pub token_span: [usize; 2],
    pub sentiment: f64,
    pub dominant_emotion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBundle {
    pub text_id: String,
    pub schema_version: String,
    pub sentences: Vec<SentenceAnnotation>,
    pub chunks: Vec<ChunkAnnotation>,
    pub token_logprobs: Vec<f64>,
    #[serde(default)]
    pub rhetorical_device_counts: BTreeMap<String, u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syllable_counts: Option<Vec<u32>>,
}

impl AnnotationBundle {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|s| s.tokens.len()).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    TextIdMismatch,
    SchemaVersion,
    NoSentences,
    EmptySentence,
    DepthOrder,
    EmbeddingDimension,
    LengthMismatch,
    LogprobRange,
    SpanCoverage,
    SentimentRange,
    UnknownDevice,
    SyllableLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// Checks a bundle against its text and the bundle invariants. Returns every
/// violation found; an empty report means the bundle is usable.
pub fn validate_bundle(bundle: &AnnotationBundle, text: &TextRecord) -> Vec<Violation> {
    let mut report = Vec::new();
    let mut push = |kind, detail: String| report.push(Violation { kind, detail });

    if bundle.text_id != text.text_id {
        push(
            ViolationKind::TextIdMismatch,
            format!("bundle {:?} vs text {:?}", bundle.text_id, text.text_id),
        );
    }
    if bundle.schema_version != SCHEMA_VERSION {
        push(
            ViolationKind::SchemaVersion,
            format!("expected {SCHEMA_VERSION:?}, found {:?}", bundle.schema_version),
        );
    }
    if bundle.sentences.is_empty() {
        push(ViolationKind::NoSentences, "bundle has no sentences".into());
    }

    let dim = bundle.sentences.first().map(|s| s.embedding.len());
    for (i, s) in bundle.sentences.iter().enumerate() {
        if s.tokens.is_empty() {
            push(ViolationKind::EmptySentence, format!("sentence {i} has no tokens"));
        }
        if s.parse_depth < s.subordination_depth {
            push(
                ViolationKind::DepthOrder,
                format!(
                    "sentence {i}: parse_depth {} < subordination_depth {}",
                    s.parse_depth, s.subordination_depth
                ),
            );
        }
        if Some(s.embedding.len()) != dim {
            push(
                ViolationKind::EmbeddingDimension,
                format!("sentence {i}: dimension {} differs from {}", s.embedding.len(), dim.unwrap_or(0)),
            );
        } else if s.embedding.iter().any(|v| !v.is_finite()) {
            push(ViolationKind::EmbeddingDimension, format!("sentence {i}: non-finite embedding"));
        }
    }

    let n = bundle.token_count();
    if bundle.token_logprobs.len() != n {
        push(
            ViolationKind::LengthMismatch,
            format!("{} token_logprobs for {n} tokens", bundle.token_logprobs.len()),
        );
    }
    if let Some(i) = bundle
        .token_logprobs
        .iter()
        .position(|lp| !lp.is_finite() || *lp > 0.0)
    {
        push(
            ViolationKind::LogprobRange,
            format!("token {i}: logprob {} not finite and <= 0", bundle.token_logprobs[i]),
        );
    }

    let mut cursor = 0usize;
    for (k, c) in bundle.chunks.iter().enumerate() {
        let [start, end] = c.token_span;
        if start != cursor || end <= start {
            push(
                ViolationKind::SpanCoverage,
                format!("chunk {k}: span [{start}, {end}) does not continue at {cursor}"),
            );
        }
        cursor = end.max(cursor);
        if !(-1.0..=1.0).contains(&c.sentiment) {
            push(
                ViolationKind::SentimentRange,
                format!("chunk {k}: sentiment {} outside [-1, 1]", c.sentiment),
            );
        }
    }
    if !bundle.chunks.is_empty() && cursor != n {
        push(
            ViolationKind::SpanCoverage,
            format!("chunks end at {cursor}, text has {n} tokens"),
        );
    }

    for device in bundle.rhetorical_device_counts.keys() {
        if !RHETORICAL_INVENTORY.contains(&device.as_str()) {
            push(ViolationKind::UnknownDevice, format!("device type {device:?}"));
        }
    }
    if let Some(syl) = &bundle.syllable_counts {
        if syl.len() != n {
            push(
                ViolationKind::SyllableLength,
                format!("{} syllable counts for {n} tokens", syl.len()),
            );
        }
    }
    report
}

/// The 17-dimensional reference-less description of one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> f64 {
        self.0[feature.index()]
    }

    pub fn set(&mut self, feature: Feature, value: f64) {
        self.0[feature.index()] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Lists every range invariant the vector violates.
    pub fn range_violations(&self) -> Vec<String> {
        use Feature::*;
        let mut out = Vec::new();
        for f in Feature::ALL {
            let v = self.get(f);
            if !v.is_finite() {
                out.push(format!("{} is not finite", f.name()));
                continue;
            }
            let (lo, hi) = match f {
                EntityCoherence => (0.0, 1.5),
                LocalCoherence | GlobalCoherence | MeanSentiment => (-1.0, 1.0),
                EmotionalVolatility | TopicEntropy | TopicDensity => (0.0, 1.0),
                Smog => (3.1291, f64::INFINITY),
                LogLikelihood => (f64::NEG_INFINITY, f64::INFINITY),
                TopicCount | SentimentVariance | SentenceLength | SyntacticDepth | Mtld
                | MaxSubordination | RhetoricalVariety | SentenceRhythm => (0.0, f64::INFINITY),
            };
            // Allow for rounding in computed cosines and entropies.
            let slack = 1e-9;
            if v < lo - slack || v > hi + slack {
                out.push(format!("{} = {v} outside [{lo}, {hi}]", f.name()));
            }
        }
        out
    }

    pub fn sub(&self, other: &FeatureVector) -> [f64; NUM_FEATURES] {
        let mut d = [0.0; NUM_FEATURES];
        for (i, slot) in d.iter_mut().enumerate() {
            *slot = self.0[i] - other.0[i];
        }
        d
    }
}

/// Stacks feature vectors into a `rows x 17` matrix in canonical column order.
pub fn feature_matrix(vectors: &[FeatureVector]) -> Result<DMatrix<f64>> {
    if vectors.is_empty() {
        return Err(Error::Invalid("feature matrix needs at least one vector".into()));
    }
    if let Some(i) = vectors.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("feature vector {i} contains a non-finite value")));
    }
    Ok(DMatrix::from_fn(vectors.len(), NUM_FEATURES, |r, c| vectors[r].0[c]))
}

/// Feature vectors keyed by text, in input row order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    pub text_ids: Vec<String>,
    pub vectors: Vec<FeatureVector>,
}

impl FeatureTable {
    pub fn push(&mut self, text_id: impl Into<String>, v: FeatureVector) {
        self.text_ids.push(text_id.into());
        self.vectors.push(v);
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn lookup(&self) -> BTreeMap<&str, &FeatureVector> {
        self.text_ids
            .iter()
            .map(String::as_str)
            .zip(self.vectors.iter())
            .collect()
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        feature_matrix(&self.vectors)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    LikertScores(BTreeMap<String, f64>),
    BinaryVerdicts(BTreeMap<String, bool>),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::LikertScores(_) => "likert_scores",
            Payload::BinaryVerdicts(_) => "binary_verdicts",
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Payload::LikertScores(m) => m.is_empty(),
            Payload::BinaryVerdicts(m) => m.is_empty(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderEvaluation {
    pub reader_id: String,
    pub text_id: String,
    #[serde(flatten)]
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceScore {
    pub reader_id: String,
    pub text_id: String,
    pub raw: f64,
    pub rho: f64,
}

/// Unordered text pair, stored with the lexicographically smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey(pub String, pub String);

impl PairKey {
    pub fn new(a: &str, b: &str) -> Self {
        if a <= b {
            PairKey(a.to_owned(), b.to_owned())
        } else {
            PairKey(b.to_owned(), a.to_owned())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairInstance {
    pub reader_id: String,
    pub pair_key: PairKey,
    pub delta: [f64; NUM_FEATURES],
    pub label: u8,
    /// True when `delta = x(pair_key.0) - x(pair_key.1)`.
    pub forward: bool,
}

impl PairInstance {
    pub fn positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderProfile {
    pub reader_id: String,
    pub dataset: String,
    pub importances: [f64; NUM_FEATURES],
    pub test_f1: f64,
    pub n_pairs: usize,
    #[serde(default)]
    pub cluster: Option<usize>,
    /// Set when the forest made no impurity-reducing split and the
    /// importances fell back to uniform.
    #[serde(default)]
    pub uniform_fallback: bool,
}

impl ReaderProfile {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.importances.iter().sum();
        if self.importances.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Schema(format!(
                "profile {:?}: importances must be non-negative and sum to 1 (sum = {sum})",
                self.reader_id
            )));
        }
        if !(0.0..=1.0).contains(&self.test_f1) {
            return Err(Error::Schema(format!(
                "profile {:?}: test_f1 {} outside [0, 1]",
                self.reader_id, self.test_f1
            )));
        }
        Ok(())
    }
}

/// Manifest naming the files of one dataset. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub texts: PathBuf,
    pub evaluations: PathBuf,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub texts: Vec<TextRecord>,
    pub evaluations: Vec<ReaderEvaluation>,
    pub annotations_path: Option<PathBuf>,
    /// Every file the dataset was loaded from, for digests.
    pub sources: Vec<PathBuf>,
}

impl Dataset {
    pub fn authorship(&self) -> BTreeMap<String, AuthorKind> {
        self.texts
            .iter()
            .map(|t| (t.text_id.clone(), t.author_kind))
            .collect()
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&raw).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: e.span().map(|s| raw[..s.start].lines().count().max(1)).unwrap_or(0),
        message: e.message().to_owned(),
    })
}

/// Loads and validates the texts and evaluations a manifest points to.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let texts_path = base.join(&manifest.texts);
    let evals_path = base.join(&manifest.evaluations);

    let texts: Vec<TextRecord> = read_jsonl(&texts_path)?;
    let mut seen = HashSet::new();
    for (i, t) in texts.iter().enumerate() {
        t.validate().map_err(|e| Error::Parse {
            path: texts_path.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(t.text_id.as_str()) {
            return Err(Error::Parse {
                path: texts_path.clone(),
                line: i + 1,
                message: format!("duplicate text_id {:?}", t.text_id),
            });
        }
    }

    let evaluations: Vec<ReaderEvaluation> = read_jsonl(&evals_path)?;
    let mut kinds = BTreeSet::new();
    for (i, ev) in evaluations.iter().enumerate() {
        if ev.payload.is_empty() {
            return Err(Error::Parse {
                path: evals_path.clone(),
                line: i + 1,
                message: "evaluation has no dimensions".into(),
            });
        }
        kinds.insert(ev.payload.kind());
        if !seen.contains(ev.text_id.as_str()) {
            return Err(Error::DanglingReference {
                text_id: ev.text_id.clone(),
            });
        }
    }
    if kinds.len() > 1 {
        return Err(Error::Schema(format!(
            "dataset {:?} mixes payload kinds {:?}",
            manifest.dataset, kinds
        )));
    }

    let annotations_path = manifest.annotations.as_ref().map(|p| base.join(p));
    let mut sources = vec![manifest_path.to_owned(), texts_path, evals_path];
    sources.extend(annotations_path.iter().cloned());
    Ok(Dataset {
        name: manifest.dataset,
        texts,
        evaluations,
        annotations_path,
        sources,
    })
}
