//! Synthetic texts and readers with planted additive utilities, and
//! scoring of how well the pipeline recovers them.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::cluster::{adjusted_rand_index, kmeans};
use crate::error::{Error, Result};
use crate::learners::{fit_reader, ForestHyperparams, SplitConfig, TrainMode};
use crate::model::{Feature, FeatureTable, FeatureVector, Payload, ReaderEvaluation, ReaderProfile, NUM_FEATURES};
use crate::prefs::{build_preferences, pairs_by_reader, sample_pairs, DEFAULT_TOP_FRACTION};
use crate::seed::{derive_seed, rng_from};

pub const LIKERT_DIMENSION: &str = "overall";
const KMEANS_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReaderSpec {
    pub reader_id: String,
    pub weights: [f64; NUM_FEATURES],
    pub noise_sigma: f64,
    pub likert_levels: u32,
    pub archetype_id: usize,
}

impl SyntheticReaderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Invalid(format!("{}: weights must be finite and non-negative", self.reader_id)));
        }
        if !(self.weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::Invalid(format!("{}: weights sum to zero", self.reader_id)));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Invalid(format!("{}: noise_sigma must be >= 0", self.reader_id)));
        }
        if self.likert_levels < 2 {
            return Err(Error::Invalid(format!("{}: likert_levels must be >= 2", self.reader_id)));
        }
        Ok(())
    }

    pub fn support(&self) -> Vec<usize> {
        (0..NUM_FEATURES).filter(|&j| self.weights[j] > 0.0).collect()
    }
}

/// Per-feature sampling range of the default corpus, with a flag for
/// integer-valued features.
pub fn default_ranges() -> [(f64, f64, bool); NUM_FEATURES] {
    use Feature::*;
    Feature::ALL.map(|f| match f {
        TopicCount => (2.0, 10.0, true),
        EntityCoherence => (0.0, 1.5, false),
        LocalCoherence => (0.0, 1.0, false),
        GlobalCoherence => (0.0, 1.0, false),
        LogLikelihood => (-5000.0, -200.0, false),
        Smog => (4.0, 18.0, false),
        MeanSentiment => (-1.0, 1.0, false),
        EmotionalVolatility => (0.0, 1.0, false),
        SentimentVariance => (0.0, 1.0, false),
        SentenceLength => (5.0, 40.0, false),
        SyntacticDepth => (2.0, 12.0, false),
        Mtld => (30.0, 150.0, false),
        MaxSubordination => (0.0, 6.0, true),
        RhetoricalVariety => (0.0, 8.0, true),
        SentenceRhythm => (0.0, 20.0, false),
        TopicEntropy => (0.0, 1.0, false),
        TopicDensity => (0.0, 1.0, false),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSpec {
    /// Independent uniforms over `default_ranges`.
    Uniform,
    /// Every feature of every text set to the value.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub table: FeatureTable,
    /// True when every feature column is constant.
    pub degenerate: bool,
}

pub fn generate_corpus(n_texts: usize, seed: u64, spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    if n_texts < 2 {
        return Err(Error::Invalid(format!("corpus needs at least 2 texts, got {n_texts}")));
    }
    let mut rng = rng_from(derive_seed(seed, "corpus"));
    let ranges = default_ranges();
    let mut table = FeatureTable::default();
    for i in 0..n_texts {
        let v = match spec {
            CorpusSpec::Uniform => FeatureVector(std::array::from_fn(|j| {
                let (lo, hi, integer) = ranges[j];
                if integer {
                    rng.random_range(lo as i64..=hi as i64) as f64
                } else {
                    lo + (hi - lo) * rng.random::<f64>()
                }
            })),
            CorpusSpec::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::Invalid("constant must be finite".into()));
                }
                FeatureVector([*c; NUM_FEATURES])
            }
        };
        table.push(format!("syn{i:05}"), v);
    }
    let degenerate = (0..NUM_FEATURES).all(|j| table.vectors.iter().all(|v| v.0[j] == table.vectors[0].0[j]));
    Ok(SyntheticCorpus { table, degenerate })
}

/// Column z-scores with population standard deviation; constant columns
/// map to zero.
pub fn standardize(vectors: &[FeatureVector]) -> Vec<[f64; NUM_FEATURES]> {
    let n = vectors.len() as f64;
    let mut mean = [0.0; NUM_FEATURES];
    let mut sd = [0.0; NUM_FEATURES];
    for j in 0..NUM_FEATURES {
        mean[j] = vectors.iter().map(|v| v.0[j]).sum::<f64>() / n;
        sd[j] = (vectors.iter().map(|v| (v.0[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
    }
    vectors
        .iter()
        .map(|v| std::array::from_fn(|j| if sd[j] > 0.0 { (v.0[j] - mean[j]) / sd[j] } else { 0.0 }))
        .collect()
}

/// Equal-width bins over `[min, max]` of the values, levels `1..=levels`.
/// A zero-width range puts everything at level 1.
pub fn quantize(values: &[f64], levels: u32) -> Vec<u32> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|&u| {
            if !(width > 0.0) {
                return 1;
            }
            let level = ((u - lo) / width * levels as f64).floor() as u32 + 1;
            level.min(levels)
        })
        .collect()
}

/// Single-dimension Likert evaluations of every text from the planted
/// utility `w . z(x) + N(0, sigma)`.
pub fn simulate_evaluations(spec: &SyntheticReaderSpec, corpus: &FeatureTable, seed: u64) -> Result<Vec<ReaderEvaluation>> {
    spec.validate()?;
    let z = standardize(&corpus.vectors);
    let mut rng = rng_from(derive_seed(seed, &format!("noise:{}", spec.reader_id)));
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Invalid(e.to_string()))?;
    let utilities: Vec<f64> = z
        .iter()
        .map(|zi| {
            let u: f64 = spec.weights.iter().zip(zi).map(|(w, x)| w * x).sum();
            if spec.noise_sigma > 0.0 {
                u + noise.sample(&mut rng)
            } else {
                u
            }
        })
        .collect();
    let levels = quantize(&utilities, spec.likert_levels);
    Ok(corpus
        .text_ids
        .iter()
        .zip(levels)
        .map(|(text_id, level)| ReaderEvaluation {
            reader_id: spec.reader_id.clone(),
            text_id: text_id.clone(),
            payload: Payload::LikertScores(BTreeMap::from([(LIKERT_DIMENSION.to_string(), level as f64)])),
        })
        .collect())
}

/// Indices of the `k` largest importances; ties go to the lower index.
pub fn top_k(importances: &[f64; NUM_FEATURES], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..NUM_FEATURES).collect();
    idx.sort_by(|&a, &b| importances[b].total_cmp(&importances[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Fraction of the planted support among the top-|support| importances.
pub fn support_recovery(importances: &[f64; NUM_FEATURES], support: &[usize]) -> Result<f64> {
    if support.is_empty() {
        return Err(Error::Invalid("empty planted support".into()));
    }
    let top = top_k(importances, support.len());
    let hits = top.iter().filter(|j| support.contains(j)).count();
    Ok(hits as f64 / support.len() as f64)
}

/// ARI between k-means on importance vectors and the planted archetypes.
pub fn archetype_recovery(importances: &[[f64; NUM_FEATURES]], planted: &[usize], k: usize, seed: u64) -> Result<f64> {
    if importances.len() != planted.len() {
        return Err(Error::Dimension {
            expected: importances.len(),
            got: planted.len(),
        });
    }
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &a in planted {
        *sizes.entry(a).or_default() += 1;
    }
    if sizes.len() < 2 || sizes.values().any(|&s| s < 2) {
        return Err(Error::InsufficientData(
            "archetype recovery needs at least 2 archetypes with 2 profiles each".into(),
        ));
    }
    let points: Vec<Vec<f64>> = importances.iter().map(|v| v.to_vec()).collect();
    let km = kmeans(&points, k, seed, KMEANS_RESTARTS)?;
    adjusted_rand_index(&km.assignments, planted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_texts: usize,
    pub readers_per_archetype: usize,
    /// Planted support of each archetype, as feature names.
    pub archetypes: Vec<Vec<String>>,
    /// Support weights are drawn from `[1, 1 + weight_jitter]` per reader.
    pub weight_jitter: f64,
    pub noise_levels: Vec<f64>,
    pub likert_levels: u32,
    pub replicates: usize,
    pub max_pairs_per_reader: usize,
    pub forest: ForestHyperparams,
    pub k_clusters: usize,
    pub top_fraction: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_texts: 200,
            readers_per_archetype: 30,
            archetypes: vec![
                vec!["local_coherence".into(), "smog".into(), "mtld".into()],
                vec!["mean_sentiment".into(), "sentence_length".into(), "topic_entropy".into()],
            ],
            weight_jitter: 0.0,
            noise_levels: vec![0.0],
            likert_levels: 7,
            replicates: 1,
            max_pairs_per_reader: 1500,
            forest: ForestHyperparams::default(),
            k_clusters: 2,
            top_fraction: DEFAULT_TOP_FRACTION,
        }
    }
}

impl ExperimentSpec {
    pub fn supports(&self) -> Result<Vec<Vec<usize>>> {
        self.archetypes
            .iter()
            .map(|names| {
                names
                    .iter()
                    .map(|n| {
                        Feature::from_name(n)
                            .map(Feature::index)
                            .ok_or_else(|| Error::Invalid(format!("unknown feature {n:?}")))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let supports = self.supports()?;
        if supports.len() < 2 || supports.iter().any(Vec::is_empty) {
            return Err(Error::Invalid("need at least 2 archetypes with non-empty supports".into()));
        }
        if self.readers_per_archetype < 2 || self.replicates == 0 || self.noise_levels.is_empty() {
            return Err(Error::Invalid("readers_per_archetype >= 2, replicates >= 1 and a noise level are required".into()));
        }
        if self.noise_levels.iter().any(|s| !(*s >= 0.0)) || !(self.weight_jitter >= 0.0) {
            return Err(Error::Invalid("noise levels and weight_jitter must be >= 0".into()));
        }
        if self.max_pairs_per_reader == 0 {
            return Err(Error::Invalid("max_pairs_per_reader must be positive".into()));
        }
        Ok(())
    }

    /// Planted readers for one noise level and replicate.
    pub fn readers(&self, sigma: f64, seed: u64) -> Result<Vec<SyntheticReaderSpec>> {
        let supports = self.supports()?;
        let mut rng = rng_from(derive_seed(seed, "reader-weights"));
        let mut out = Vec::new();
        for (a, support) in supports.iter().enumerate() {
            for r in 0..self.readers_per_archetype {
                let mut weights = [0.0; NUM_FEATURES];
                for &j in support {
                    weights[j] = 1.0 + self.weight_jitter * rng.random::<f64>();
                }
                out.push(SyntheticReaderSpec {
                    reader_id: format!("a{a}r{r:03}"),
                    weights,
                    noise_sigma: sigma,
                    likert_levels: self.likert_levels,
                    archetype_id: a,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReaderRecovery {
    pub reader_id: String,
    pub archetype: usize,
    pub recall: f64,
    pub test_f1: f64,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub sigma: f64,
    pub replicate: usize,
    pub ari: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
    pub min_f1: f64,
    pub max_f1: f64,
    pub excluded_readers: Vec<String>,
    pub readers: Vec<ReaderRecovery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub seed: u64,
    pub spec: ExperimentSpec,
    pub levels: Vec<LevelReport>,
}

#[derive(Debug, Clone)]
pub struct LevelRun {
    pub report: LevelReport,
    pub profiles: Vec<ReaderProfile>,
}

/// Simulates, trains and scores one noise level of one replicate.
pub fn run_level(spec: &ExperimentSpec, corpus: &FeatureTable, sigma: f64, replicate: usize, seed: u64) -> Result<LevelRun> {
    let level_seed = derive_seed(seed, &format!("level:{sigma}:{replicate}"));
    let readers = spec.readers(sigma, level_seed)?;
    let mut evaluations = Vec::new();
    for r in &readers {
        evaluations.extend(simulate_evaluations(r, corpus, level_seed)?);
    }
    let lookup = corpus.lookup();
    let prefs = build_preferences(&evaluations, &lookup, spec.top_fraction)?;
    let by_reader = pairs_by_reader(&prefs.pairs);
    let excluded: Vec<String> = prefs.excluded.iter().map(|e| e.reader_id.clone()).collect();

    let mode = TrainMode::Fixed(spec.forest);
    let split = SplitConfig::default();
    let fitted: Vec<Result<Option<(ReaderProfile, &SyntheticReaderSpec)>>> = readers
        .par_iter()
        .map(|r| {
            let Some(pairs) = by_reader.get(&r.reader_id) else {
                return Ok(None);
            };
            let reader_seed = derive_seed(level_seed, &format!("reader:{}", r.reader_id));
            let pairs = sample_pairs(pairs.clone(), spec.max_pairs_per_reader, derive_seed(reader_seed, "sample"));
            match fit_reader(&r.reader_id, "synthetic", &pairs, &mode, &split, reader_seed) {
                Ok(fit) => Ok(Some((fit.profile, r))),
                Err(Error::InsufficientData(_) | Error::SingleClass) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut fits = Vec::new();
    let mut excluded = excluded;
    for (r, f) in readers.iter().zip(fitted) {
        match f? {
            Some(x) => fits.push(x),
            None if !excluded.contains(&r.reader_id) => excluded.push(r.reader_id.clone()),
            None => {}
        }
    }

    let importances: Vec<[f64; NUM_FEATURES]> = fits.iter().map(|(p, _)| p.importances).collect();
    let planted: Vec<usize> = fits.iter().map(|(_, r)| r.archetype_id).collect();
    let points: Vec<Vec<f64>> = importances.iter().map(|v| v.to_vec()).collect();
    let cluster_seed = derive_seed(level_seed, "clusters");
    let ari = archetype_recovery(&importances, &planted, spec.k_clusters, cluster_seed)?;
    let km = kmeans(&points, spec.k_clusters, cluster_seed, KMEANS_RESTARTS)?;

    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    for ((mut profile, r), cluster) in fits.into_iter().zip(km.assignments) {
        let recall = support_recovery(&profile.importances, &r.support())?;
        rows.push(ReaderRecovery {
            reader_id: r.reader_id.clone(),
            archetype: r.archetype_id,
            recall,
            test_f1: profile.test_f1,
            cluster,
        });
        profile.cluster = Some(cluster);
        profiles.push(profile);
    }
    let n = rows.len() as f64;
    let f1s: Vec<f64> = rows.iter().map(|r| r.test_f1).collect();
    Ok(LevelRun {
        report: LevelReport {
            sigma,
            replicate,
            ari,
            mean_recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
            mean_f1: f1s.iter().sum::<f64>() / n,
            min_f1: f1s.iter().cloned().fold(f64::INFINITY, f64::min),
            max_f1: f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            excluded_readers: excluded,
            readers: rows,
        },
        profiles,
    })
}

/// Runs every noise level and replicate of the experiment.
pub fn run_experiment(spec: &ExperimentSpec, seed: u64) -> Result<RecoveryReport> {
    spec.validate()?;
    let mut levels = Vec::new();
    for replicate in 0..spec.replicates {
        let corpus_seed = derive_seed(seed, &format!("replicate:{replicate}"));
        let corpus = generate_corpus(spec.n_texts, corpus_seed, &CorpusSpec::Uniform)?;
        for &sigma in &spec.noise_levels {
            log::info!("simulating sigma={sigma} replicate={replicate}");
            levels.push(run_level(spec, &corpus.table, sigma, replicate, corpus_seed)?.report);
        }
    }
    Ok(RecoveryReport {
        seed,
        spec: spec.clone(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reader(weights: [f64; NUM_FEATURES], sigma: f64) -> SyntheticReaderSpec {
        SyntheticReaderSpec {
            reader_id: "r".into(),
            weights,
            noise_sigma: sigma,
            likert_levels: 7,
            archetype_id: 0,
        }
    }

    fn level(ev: &ReaderEvaluation) -> f64 {
        match &ev.payload {
            Payload::LikertScores(m) => m[LIKERT_DIMENSION],
            _ => unreachable!(),
        }
    }

    #[test]
    fn quantization_arithmetic() {
        assert_eq!(quantize(&[0.0, 0.5, 1.0], 7), vec![1, 4, 7]);
        assert_eq!(quantize(&[2.0, 2.0], 5), vec![1, 1]);
    }

    #[test]
    fn corpus_contracts() {
        let a = generate_corpus(2, 1, &CorpusSpec::Uniform).unwrap();
        assert_ne!(a.table.vectors[0], a.table.vectors[1]);
        assert!(!a.degenerate);
        assert_eq!(a, generate_corpus(2, 1, &CorpusSpec::Uniform).unwrap());
        let c = generate_corpus(5, 1, &CorpusSpec::Constant(0.5)).unwrap();
        assert!(c.degenerate);
        assert!(c.table.vectors.iter().all(|v| v.0 == [0.5; NUM_FEATURES]));
        assert!(generate_corpus(1, 1, &CorpusSpec::Uniform).is_err());
        let big = generate_corpus(300, 4, &CorpusSpec::Uniform).unwrap();
        assert!(big.table.vectors.iter().all(|v| v.range_violations().is_empty()));
    }

    #[test]
    fn utility_is_monotone_in_the_weighted_feature() {
        let mut table = FeatureTable::default();
        let mut lo = FeatureVector([1.0; NUM_FEATURES]);
        let mut hi = lo;
        lo.0[0] = 2.0;
        hi.0[0] = 5.0;
        table.push("lo", lo);
        table.push("hi", hi);
        let mut w = [0.0; NUM_FEATURES];
        w[0] = 1.0;
        let ev = simulate_evaluations(&reader(w, 0.0), &table, 0).unwrap();
        assert!(level(&ev[1]) > level(&ev[0]));
    }

    #[test]
    fn identical_texts_give_equal_evaluations() {
        let c = generate_corpus(4, 0, &CorpusSpec::Constant(1.0)).unwrap();
        let ev = simulate_evaluations(&reader([1.0; NUM_FEATURES], 0.0), &c.table, 0).unwrap();
        assert!(ev.iter().all(|e| level(e) == level(&ev[0])));
    }

    #[test]
    fn invalid_readers_are_rejected() {
        assert!(reader([0.0; NUM_FEATURES], 0.0).validate().is_err());
        assert!(reader([1.0; NUM_FEATURES], -1.0).validate().is_err());
    }

    #[test]
    fn recall_examples() {
        let mut imp = [0.0; NUM_FEATURES];
        imp[0] = 0.9;
        imp[1] = 0.1;
        assert_eq!(support_recovery(&imp, &[0]).unwrap(), 1.0);
        assert_eq!(support_recovery(&imp, &[5]).unwrap(), 0.0);
        let all: Vec<usize> = (0..NUM_FEATURES).collect();
        assert_eq!(support_recovery(&imp, &all).unwrap(), 1.0);
        assert!(support_recovery(&imp, &[]).is_err());
    }

    #[test]
    fn archetype_examples() {
        let mut a = [0.0; NUM_FEATURES];
        a[0] = 1.0;
        let mut b = [0.0; NUM_FEATURES];
        b[1] = 1.0;
        let ari = archetype_recovery(&[a, a, b, b], &[0, 0, 1, 1], 2, 0).unwrap();
        assert_eq!(ari, 1.0);
        assert!(archetype_recovery(&[a, a], &[0, 0], 2, 0).is_err());
    }

    #[test]
    fn default_spec_roundtrips_and_validates() {
        let s = ExperimentSpec::default();
        s.validate().unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentSpec>(&json).unwrap(), s);
        assert_eq!(serde_json::from_str::<ExperimentSpec>("{}").unwrap(), s);
    }
}
