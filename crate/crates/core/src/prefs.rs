//! From raw reader evaluations to normalized preference values, preference
//! centroids and balanced pairwise training instances.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FeatureVector, PairInstance, PairKey, Payload, PreferenceScore, ReaderEvaluation, NUM_FEATURES};
use crate::seed::rng_from;

pub const DEFAULT_TOP_FRACTION: f64 = 0.25;
pub const CENTROID_EPSILON: f64 = 1e-9;

/// Raw score per text for one reader: Likert dimensions are summed, binary
/// verdicts counted.
pub fn aggregate_scores(evaluations: &[&ReaderEvaluation]) -> Result<BTreeMap<String, f64>> {
    let kinds: BTreeSet<&str> = evaluations.iter().map(|e| e.payload.kind()).collect();
    if kinds.len() > 1 {
        return Err(Error::MixedPayload(format!("{kinds:?}")));
    }
    let mut out = BTreeMap::new();
    for ev in evaluations {
        let raw = match &ev.payload {
            Payload::LikertScores(m) => m.values().sum(),
            Payload::BinaryVerdicts(m) => m.values().filter(|&&v| v).count() as f64,
        };
        if out.insert(ev.text_id.clone(), raw).is_some() {
            return Err(Error::DuplicateEvaluation {
                reader_id: ev.reader_id.clone(),
                text_id: ev.text_id.clone(),
            });
        }
    }
    Ok(out)
}

/// Per-reader min-max normalization of raw scores.
pub fn normalize_scores(reader_id: &str, raw: &BTreeMap<String, f64>) -> Result<Vec<PreferenceScore>> {
    if raw.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "reader {reader_id} scored {} text(s); normalization needs 2",
            raw.len()
        )));
    }
    let min = raw.values().copied().fold(f64::INFINITY, f64::min);
    let max = raw.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Err(Error::DegenerateReader(reader_id.to_owned()));
    }
    Ok(raw
        .iter()
        .map(|(text_id, &s)| PreferenceScore {
            reader_id: reader_id.to_owned(),
            text_id: text_id.clone(),
            raw: s,
            rho: (s - min) / (max - min),
        })
        .collect())
}

fn features_for<'a>(
    features: &BTreeMap<&str, &'a FeatureVector>,
    text_id: &str,
) -> Result<&'a FeatureVector> {
    features
        .get(text_id)
        .copied()
        .ok_or_else(|| Error::DanglingReference {
            text_id: text_id.to_owned(),
        })
}

/// Texts in the top set: the best `ceil(top_fraction * n)` by rho, plus every
/// text tied with the cutoff value.
pub fn top_set(scores: &[PreferenceScore], top_fraction: f64) -> Vec<&PreferenceScore> {
    if scores.is_empty() || top_fraction <= 0.0 {
        return Vec::new();
    }
    let mut sorted: Vec<&PreferenceScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.rho.total_cmp(&a.rho).then(a.text_id.cmp(&b.text_id)));
    let n_top = ((top_fraction * scores.len() as f64).ceil() as usize).clamp(1, scores.len());
    let cutoff = sorted[n_top - 1].rho;
    sorted.into_iter().filter(|s| s.rho >= cutoff).collect()
}

/// rho-weighted mean feature vector of the reader's top-rated texts.
pub fn preference_centroid(
    scores: &[PreferenceScore],
    features: &BTreeMap<&str, &FeatureVector>,
    top_fraction: f64,
    epsilon: f64,
) -> Result<[f64; NUM_FEATURES]> {
    let top = top_set(scores, top_fraction);
    if top.is_empty() {
        return Err(Error::InsufficientData("empty top set".into()));
    }
    let mut acc = [0.0; NUM_FEATURES];
    let mut weight = 0.0;
    for s in top {
        let x = features_for(features, &s.text_id)?;
        for (a, v) in acc.iter_mut().zip(x.as_slice()) {
            *a += s.rho * v;
        }
        weight += s.rho;
    }
    acc.iter_mut().for_each(|a| *a /= weight + epsilon);
    Ok(acc)
}

/// Two mirrored instances for every untied pair of scored texts. Output is
/// ordered by pair key, forward instance first.
pub fn generate_pairs(
    scores: &[PreferenceScore],
    features: &BTreeMap<&str, &FeatureVector>,
) -> Result<Vec<PairInstance>> {
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pair generation needs 2 scored texts, found {}",
            scores.len()
        )));
    }
    let mut sorted: Vec<&PreferenceScore> = scores.iter().collect();
    sorted.sort_by(|a, b| a.text_id.cmp(&b.text_id));
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        let a = sorted[i];
        let xa = features_for(features, &a.text_id)?;
        for b in &sorted[i + 1..] {
            if a.rho == b.rho {
                continue;
            }
            let xb = features_for(features, &b.text_id)?;
            let key = PairKey(a.text_id.clone(), b.text_id.clone());
            let forward_label = u8::from(a.rho > b.rho);
            out.push(PairInstance {
                reader_id: a.reader_id.clone(),
                pair_key: key.clone(),
                delta: xa.sub(xb),
                label: forward_label,
                forward: true,
            });
            out.push(PairInstance {
                reader_id: a.reader_id.clone(),
                pair_key: key,
                delta: xb.sub(xa),
                label: 1 - forward_label,
                forward: false,
            });
        }
    }
    Ok(out)
}

/// Number of distinct pair keys among the instances.
pub fn count_pairs(pairs: &[PairInstance]) -> usize {
    pairs.iter().filter(|p| p.forward).count()
}

/// Keeps at most `max_pairs` randomly chosen pair groups (both mirrors of
/// each), preserving input order.
pub fn sample_pairs(pairs: Vec<PairInstance>, max_pairs: usize, seed: u64) -> Vec<PairInstance> {
    let keys: BTreeSet<&PairKey> = pairs.iter().map(|p| &p.pair_key).collect();
    if keys.len() <= max_pairs {
        return pairs;
    }
    let mut keys: Vec<&PairKey> = keys.into_iter().collect();
    keys.shuffle(&mut rng_from(seed));
    let keep: BTreeSet<PairKey> = keys.into_iter().take(max_pairs).cloned().collect();
    pairs.into_iter().filter(|p| keep.contains(&p.pair_key)).collect()
}

pub fn group_by_reader(evaluations: &[ReaderEvaluation]) -> BTreeMap<&str, Vec<&ReaderEvaluation>> {
    let mut out: BTreeMap<&str, Vec<&ReaderEvaluation>> = BTreeMap::new();
    for ev in evaluations {
        out.entry(ev.reader_id.as_str()).or_default().push(ev);
    }
    out
}

/// Splits a flat pair list into per-reader lists, preserving order.
pub fn pairs_by_reader(pairs: &[PairInstance]) -> BTreeMap<String, Vec<PairInstance>> {
    let mut out: BTreeMap<String, Vec<PairInstance>> = BTreeMap::new();
    for p in pairs {
        out.entry(p.reader_id.clone()).or_default().push(p.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedReader {
    pub reader_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceData {
    pub scores: Vec<PreferenceScore>,
    pub centroids: BTreeMap<String, [f64; NUM_FEATURES]>,
    pub pairs: Vec<PairInstance>,
    pub excluded: Vec<ExcludedReader>,
}

/// Runs aggregation, normalization, centroids and pair generation for every
/// reader of a dataset. Degenerate readers are excluded and reported.
pub fn build_preferences(
    evaluations: &[ReaderEvaluation],
    features: &BTreeMap<&str, &FeatureVector>,
    top_fraction: f64,
) -> Result<PreferenceData> {
    let groups: Vec<(&str, Vec<&ReaderEvaluation>)> = group_by_reader(evaluations).into_iter().collect();
    type ReaderResult = Result<std::result::Result<(Vec<PreferenceScore>, [f64; NUM_FEATURES], Vec<PairInstance>), ExcludedReader>>;
    let per_reader: Vec<(String, ReaderResult)> = groups
        .par_iter()
        .map(|(reader, evs)| {
            let run = || -> ReaderResult {
                let raw = aggregate_scores(evs)?;
                let scores = match normalize_scores(reader, &raw) {
                    Ok(s) => s,
                    Err(e @ (Error::DegenerateReader(_) | Error::InsufficientData(_))) => {
                        return Ok(Err(ExcludedReader {
                            reader_id: reader.to_string(),
                            reason: e.to_string(),
                        }))
                    }
                    Err(e) => return Err(e),
                };
                let centroid = preference_centroid(&scores, features, top_fraction, CENTROID_EPSILON)?;
                let pairs = generate_pairs(&scores, features)?;
                Ok(Ok((scores, centroid, pairs)))
            };
            (reader.to_string(), run())
        })
        .collect();

    let mut data = PreferenceData::default();
    for (reader, result) in per_reader {
        match result? {
            Ok((scores, centroid, pairs)) => {
                data.scores.extend(scores);
                data.centroids.insert(reader, centroid);
                data.pairs.extend(pairs);
            }
            Err(excluded) => {
                log::warn!("excluding reader {}: {}", excluded.reader_id, excluded.reason);
                data.excluded.push(excluded);
            }
        }
    }
    Ok(data)
}
