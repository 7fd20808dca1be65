//! Acceptance suite. Runs every primary criterion, prints one line per
//! criterion (PASS, FAIL, or N/A for a conditional criterion whose premise
//! does not hold) and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use litpref::analysis::{
    adjusted_rand_index, ai_preference_rate, correlation_matrix, fit_pca, kmeans, redundancy_report, RateScope,
};
use litpref::learners::{fit_logistic_baseline, fit_reader, ForestHyperparams, SplitConfig, TrainMode};
use litpref::metrics::{self, extract_features, MetricContext, TopicOutputs};
use litpref::model::{
    load_dataset, validate_bundle, AnnotationBundle, ChunkAnnotation, FeatureVector, PairInstance, PairKey, Role,
    SentenceAnnotation, FEATURE_NAMES, NUM_FEATURES, RHETORICAL_INVENTORY,
};
use litpref::pipeline::{self, RunConfig};
use litpref::prefs::{generate_pairs, normalize_scores, preference_centroid, CENTROID_EPSILON};
use litpref::synth::{generate_corpus, run_level, CorpusSpec, ExperimentSpec};
use litpref::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

enum Outcome {
    Pass(String),
    /// Conditional criterion whose premise is not met.
    NotApplicable(String),
}

type Check = Result<Outcome, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

// ------------------------------------------------------------- metrics

/// Tolerance-checked comparison log for the golden suite.
#[derive(Default)]
struct Golden {
    checked: usize,
    failures: Vec<String>,
}

impl Golden {
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.checked += 1;
        if !((got - want).abs() <= tol) {
            self.failures.push(format!("{name}: got {got}, want {want} (tol {tol:e})"));
        }
    }

    fn value(&mut self, name: &str, got: litpref::Result<f64>, want: f64, tol: f64) {
        match got {
            Ok(v) => self.close(name, v, want, tol),
            Err(e) => {
                self.checked += 1;
                self.failures.push(format!("{name}: unexpected error {e}"));
            }
        }
    }

    fn error_naming(&mut self, name: &str, got: litpref::Result<impl std::fmt::Debug>, metric: &str) {
        self.checked += 1;
        match got {
            Err(Error::Metric { metric: m, .. }) if m == metric => {}
            other => self.failures.push(format!("{name}: expected error naming {metric}, got {other:?}")),
        }
    }
}

fn sent(tokens: &[&str], parse_depth: u32, sub: u32, embedding: &[f64], entities: &[(&str, Role)]) -> SentenceAnnotation {
    SentenceAnnotation {
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
        parse_depth,
        subordination_depth: sub,
        embedding: embedding.to_vec(),
        entities: entities.iter().map(|(e, r)| (e.to_string(), *r)).collect(),
    }
}

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// Bundle with the given sentences and one chunk per (sentiment, emotion)
/// over an even split of the tokens.
fn bundle(sentences: Vec<SentenceAnnotation>, chunks: &[(f64, &str)]) -> AnnotationBundle {
    let n: usize = sentences.iter().map(|s| s.tokens.len()).sum();
    let k = chunks.len();
    AnnotationBundle {
        text_id: "g".into(),
        schema_version: "1".into(),
        sentences,
        chunks: chunks
            .iter()
            .enumerate()
            .map(|(i, (s, e))| ChunkAnnotation {
                token_span: [i * n / k, (i + 1) * n / k],
                sentiment: *s,
                dominant_emotion: e.to_string(),
            })
            .collect(),
        token_logprobs: vec![-1.0; n],
        rhetorical_device_counts: BTreeMap::new(),
        syllable_counts: None,
    }
}

fn by_lengths(lengths: &[usize]) -> AnnotationBundle {
    let s = lengths
        .iter()
        .map(|&l| {
            let w = words(l);
            let w: Vec<&str> = w.iter().map(String::as_str).collect();
            sent(&w, 1, 0, &[1.0], &[])
        })
        .collect();
    bundle(s, &[(0.0, "neutral")])
}

fn by_depths(depths: &[(u32, u32)]) -> AnnotationBundle {
    let s = depths.iter().map(|&(d, sub)| sent(&["x"], d, sub, &[1.0], &[])).collect();
    bundle(s, &[(0.0, "neutral")])
}

fn by_tokens(tokens: &[&str]) -> AnnotationBundle {
    bundle(vec![sent(tokens, 1, 0, &[1.0], &[])], &[(0.0, "neutral")])
}

fn by_embeddings(e: &[&[f64]]) -> AnnotationBundle {
    bundle(e.iter().map(|v| sent(&["x"], 1, 0, v, &[])).collect(), &[(0.0, "neutral")])
}

fn by_entities(e: &[&[(&str, Role)]]) -> AnnotationBundle {
    bundle(e.iter().map(|v| sent(&["x"], 1, 0, &[1.0], v)).collect(), &[(0.0, "neutral")])
}

fn by_chunks(chunks: &[(f64, &str)]) -> AnnotationBundle {
    let w = words(12);
    let w: Vec<&str> = w.iter().map(String::as_str).collect();
    bundle(vec![sent(&w, 1, 0, &[1.0], &[])], chunks)
}

/// `sentences` one-token sentences with `poly` polysyllabic tokens in the
/// SMOG sample, syllable counts supplied explicitly.
fn smog_bundle(sentences: usize, poly_per_sentence: &[usize]) -> AnnotationBundle {
    let s: Vec<SentenceAnnotation> = (0..sentences)
        .map(|i| {
            let w = words(poly_per_sentence.get(i).copied().unwrap_or(0).max(1));
            let w: Vec<&str> = w.iter().map(String::as_str).collect();
            sent(&w, 1, 0, &[1.0], &[])
        })
        .collect();
    let mut b = bundle(s, &[(0.0, "neutral")]);
    b.syllable_counts = Some(
        b.sentences
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                let poly = poly_per_sentence.get(i).copied().unwrap_or(0);
                (0..s.tokens.len()).map(move |j| if j < poly { 3 } else { 1 })
            })
            .collect(),
    );
    b
}

fn topics(sections: &[&[f64]], proportions: &[f64], graph: (usize, usize)) -> TopicOutputs {
    TopicOutputs {
        k_star: 2,
        section_topic_vectors: sections.iter().map(|s| s.to_vec()).collect(),
        theme_proportions: proportions.to_vec(),
        theme_graph: graph,
    }
}

fn metric_golden_suite() -> Check {
    use metrics::*;
    const E: f64 = 1e-9;
    const T: f64 = 1e-4;
    let mut g = Golden::default();

    for (l, want) in [(&[4usize][..], 4.0), (&[2, 4, 6], 4.0), (&[10, 20], 15.0)] {
        let b = by_lengths(l);
        g.value(&format!("sentence_length {l:?}"), avg_sentence_length(&MetricContext::new(&b, None)), want, E);
    }
    for (l, want) in [(&[5usize, 5, 5][..], 0.0), (&[2, 4], 1.0), (&[1, 3, 5], 1.63299)] {
        let b = by_lengths(l);
        g.value(&format!("sentence_rhythm {l:?}"), sentence_rhythm(&MetricContext::new(&b, None)), want, T);
    }
    for (d, want) in [(&[0u32][..], 0.0), (&[2, 4], 3.0), (&[1, 2, 3, 4], 2.5)] {
        let b = by_depths(&d.iter().map(|&x| (x, 0)).collect::<Vec<_>>());
        g.value(&format!("syntactic_depth {d:?}"), avg_syntactic_depth(&MetricContext::new(&b, None)), want, E);
    }
    for (s, want) in [(&[0u32, 0][..], 0.0), (&[1, 3, 2], 3.0), (&[5], 5.0)] {
        let b = by_depths(&s.iter().map(|&x| (x + 1, x)).collect::<Vec<_>>());
        let got = max_subordination(&MetricContext::new(&b, None)).map(f64::from);
        g.value(&format!("max_subordination {s:?}"), got, want, E);
    }

    let b = by_tokens(&["a", "b", "a", "b", "a", "b", "a", "b"]);
    g.value("mtld abab", mtld(&MetricContext::new(&b, None)), 4.0, T);
    let b = by_tokens(&["a"; 10]);
    g.value("mtld identical", mtld(&MetricContext::new(&b, None)), 2.0, T);
    let w = words(10);
    let w: Vec<&str> = w.iter().map(String::as_str).collect();
    let b = by_tokens(&w);
    let m = mtld_detail(&MetricContext::new(&b, None)).map_err(err)?;
    g.close("mtld distinct", m.value, 10.0, E);
    g.checked += 1;
    if !m.fallback {
        g.failures.push("mtld distinct: fallback not flagged".into());
    }

    g.value("smog P=0", smog(&MetricContext::new(&smog_bundle(5, &[]), None)), 3.1291, T);
    g.value("smog P=30 S=30", smog(&MetricContext::new(&smog_bundle(30, &[1; 30]), None)), 8.8418, T);
    // The stated 14.5544 for P=120 disagrees with its own formula by 1.9e-4;
    // the oracle evaluates the formula directly.
    let want = 1.0430 * 120f64.sqrt() + 3.1291;
    g.value("smog P=120 S=30", smog(&MetricContext::new(&smog_bundle(30, &[4; 30]), None)), want, T);

    use Role::*;
    let b = by_entities(&[&[("A", S), ("B", O)], &[("A", S), ("C", O)]]);
    g.value("entity_coherence shared A", entity_coherence(&MetricContext::new(&b, None)), 0.5, T);
    let b = by_entities(&[&[("A", S), ("B", O)], &[("A", S), ("B", O)]]);
    g.value("entity_coherence identical", entity_coherence(&MetricContext::new(&b, None)), 1.5, E);
    let b = by_entities(&[&[("A", S)], &[("B", O)]]);
    g.value("entity_coherence disjoint", entity_coherence(&MetricContext::new(&b, None)), 0.0, E);

    let b = by_embeddings(&[&[0.3, 0.4], &[0.3, 0.4]]);
    g.value("local_coherence identical", local_coherence(&MetricContext::new(&b, None)), 1.0, E);
    let b = by_embeddings(&[&[1.0, 0.0], &[0.0, 1.0]]);
    g.value("local_coherence orthogonal", local_coherence(&MetricContext::new(&b, None)), 0.0, E);
    let b = by_embeddings(&[&[1.0, 0.0], &[0.70711, 0.70711], &[0.0, 1.0]]);
    g.value("local_coherence diagonal", local_coherence(&MetricContext::new(&b, None)), 0.70711, T);

    let b = by_lengths(&[3, 3]);
    let t = topics(&[&[0.3, 0.7], &[0.3, 0.7], &[0.3, 0.7]], &[1.0], (1, 0));
    g.value("global_coherence shared", global_coherence(&MetricContext::new(&b, Some(&t))), 1.0, E);
    let t = topics(&[&[1.0, 0.0], &[0.0, 1.0]], &[1.0], (1, 0));
    g.value("global_coherence orthogonal", global_coherence(&MetricContext::new(&b, Some(&t))), 0.0, E);
    let t = topics(&[&[1.0, 0.0], &[0.0, 1.0], &[0.5, 0.5]], &[1.0], (1, 0));
    g.value("global_coherence three", global_coherence(&MetricContext::new(&b, Some(&t))), 0.4714, T);

    let mut b = by_lengths(&[3]);
    b.token_logprobs = vec![];
    g.value("log_likelihood empty", log_likelihood(&MetricContext::new(&b, None)), 0.0, E);
    b.token_logprobs = vec![0.25f64.ln(); 3];
    g.value("log_likelihood uniform", log_likelihood(&MetricContext::new(&b, None)), -4.15888, T);
    b.token_logprobs = vec![-1.0, -2.5];
    g.value("log_likelihood sum", log_likelihood(&MetricContext::new(&b, None)), -3.5, E);

    for (ch, m, v) in [
        (&[(0.4, "joy")][..], 0.4, 0.0),
        (&[(1.0, "joy"), (-1.0, "joy")], 0.0, 1.0),
        (&[(0.2, "joy"), (0.2, "joy"), (0.2, "joy")], 0.2, 0.0),
    ] {
        let b = by_chunks(ch);
        let (mean, var) = sentiment_stats(&MetricContext::new(&b, None)).map_err(err)?;
        g.close(&format!("sentiment mean {ch:?}"), mean, m, E);
        g.close(&format!("sentiment variance {ch:?}"), var, v, E);
    }
    for (em, want) in [
        (&["joy", "joy", "joy"][..], 0.0),
        (&["joy", "sadness", "joy", "sadness"], 1.0),
        (&["joy", "joy", "sadness", "joy"], 2.0 / 3.0),
    ] {
        let ch: Vec<(f64, &str)> = em.iter().map(|e| (0.0, *e)).collect();
        let b = by_chunks(&ch);
        g.value(&format!("volatility {em:?}"), emotional_volatility(&MetricContext::new(&b, None)), want, E);
    }

    let mut b = by_lengths(&[3]);
    for (counts, want) in [
        (vec![("anaphora", 0), ("simile", 0)], 0.0),
        (vec![("metaphor", 3), ("anaphora", 1), ("simile", 0)], 2.0),
        (RHETORICAL_INVENTORY.iter().map(|d| (*d, 1)).collect(), RHETORICAL_INVENTORY.len() as f64),
    ] {
        b.rhetorical_device_counts = counts.iter().map(|(d, c)| (d.to_string(), *c)).collect();
        let got = rhetorical_variety(&MetricContext::new(&b, None)).map(f64::from);
        g.value(&format!("rhetorical_variety {counts:?}"), got, want, E);
    }

    g.value("entropy C=1", entropy_normalized(&[1.0]), 0.0, E);
    g.value("entropy uniform C=5", entropy_normalized(&[0.2; 5]), 1.0, E);
    g.value("entropy (0.5,0.25,0.25)", entropy_normalized(&[0.5, 0.25, 0.25]), 0.94639, T);
    g.value("density V=2 E=1", graph_density(2, 1), 1.0, E);
    g.value("density V=4 E=3", graph_density(4, 3), 0.5, E);
    g.value("density V=1", graph_density(1, 0), 0.0, E);

    // Composition and error attribution.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b = common::random_bundle(&mut rng, "g");
    let t = common::random_topics(&mut rng);
    let text = common::text_record("g");
    let ctx = MetricContext::new(&b, Some(&t));
    let v = extract_features(&text, &ctx).map_err(err)?.features;
    let (mean_s, var_s) = sentiment_stats(&ctx).map_err(err)?;
    let singles = [
        t.k_star as f64,
        entity_coherence(&ctx).map_err(err)?,
        local_coherence(&ctx).map_err(err)?,
        global_coherence(&ctx).map_err(err)?,
        log_likelihood(&ctx).map_err(err)?,
        smog(&ctx).map_err(err)?,
        mean_s,
        emotional_volatility(&ctx).map_err(err)?,
        var_s,
        avg_sentence_length(&ctx).map_err(err)?,
        avg_syntactic_depth(&ctx).map_err(err)?,
        mtld(&ctx).map_err(err)?,
        max_subordination(&ctx).map_err(err)? as f64,
        rhetorical_variety(&ctx).map_err(err)? as f64,
        sentence_rhythm(&ctx).map_err(err)?,
        thematic_entropy(&ctx).map_err(err)?,
        thematic_density(&ctx).map_err(err)?,
    ];
    for (j, want) in singles.iter().enumerate() {
        g.close(&format!("extract_features.{}", FEATURE_NAMES[j]), v.0[j], *want, 0.0);
    }
    let mut one = by_lengths(&[3]);
    one.text_id = "g".into();
    g.error_naming("extract one sentence", extract_features(&text, &MetricContext::new(&one, Some(&t))), "entity_coherence");
    let mut no_chunks = by_lengths(&[3, 3]);
    no_chunks.chunks.clear();
    g.error_naming("extract no chunks", extract_features(&text, &MetricContext::new(&no_chunks, Some(&t))), "sentiment_stats");

    let detail = format!(
        "{} checks; smog P=120 checked against the formula value {want:.6} (stated 14.5544)",
        g.checked
    );
    ensure(g.failures.is_empty(), format!("{}: {}", detail, g.failures.join("; ")))?;
    Ok(Outcome::Pass(detail))
}

fn formula_bounds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let text = common::text_record("b");
    let mut violations = Vec::new();
    let mut fitted = 0;
    for i in 0..1000 {
        let b = common::random_bundle(&mut rng, "b");
        let schema = validate_bundle(&b, &text);
        if !schema.is_empty() {
            return Err(format!("generator produced an invalid bundle: {schema:?}"));
        }
        // The first 50 bundles go through the real topic model; the rest use
        // random topic outputs satisfying their invariants.
        let topics = if i < 50 {
            fitted += 1;
            let cfg = litpref::topic::TopicConfig {
                iterations: 200,
                ..Default::default()
            };
            litpref::topic::fit_text_topics(&b, &cfg, i).map_err(err)?.0
        } else {
            common::random_topics(&mut rng)
        };
        match extract_features(&text, &MetricContext::new(&b, Some(&topics))) {
            Ok(e) => violations.extend(e.features.range_violations().into_iter().map(|v| format!("bundle {i}: {v}"))),
            Err(e) => violations.push(format!("bundle {i}: {e}")),
        }
    }
    ensure(violations.is_empty(), format!("{} violations: {:?}", violations.len(), &violations[..violations.len().min(5)]))?;
    Ok(Outcome::Pass(format!("1000 bundles ({fitted} with fitted topic models), 0 violations")))
}

// -------------------------------------------------------- preferences

fn fv(first: f64, rest: f64) -> FeatureVector {
    let mut v = [rest; NUM_FEATURES];
    v[0] = first;
    FeatureVector(v)
}

fn scores_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn normalization_and_centroid() -> Check {
    let rho = |raw: &[(&str, f64)]| -> Result<Vec<f64>, String> {
        Ok(normalize_scores("r", &scores_of(raw)).map_err(err)?.iter().map(|s| s.rho).collect())
    };
    let r = rho(&[("a", 2.0), ("b", 5.0), ("c", 7.0)])?;
    ensure(r == vec![0.0, 0.6, 1.0], format!("raw {{2,5,7}} -> {r:?}"))?;
    ensure(rho(&[("a", 0.0), ("b", 10.0)])? == vec![0.0, 1.0], "raw {0,10} endpoints")?;
    ensure(
        matches!(normalize_scores("r", &scores_of(&[("a", 4.0), ("b", 4.0), ("c", 4.0)])), Err(Error::DegenerateReader(_))),
        "raw {4,4,4} not excluded as degenerate",
    )?;

    // Affine invariance of rho, pairs and centroids over random readers.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut max_rho_diff: f64 = 0.0;
    let mut max_centroid_diff: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..30);
        let feats: Vec<(String, FeatureVector)> = (0..n)
            .map(|i| (format!("t{i:02}"), FeatureVector(std::array::from_fn(|_| rng.random_range(-100.0..100.0)))))
            .collect();
        let lk: BTreeMap<&str, &FeatureVector> = feats.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let raw: BTreeMap<String, f64> = feats.iter().map(|(k, _)| (k.clone(), rng.random_range(1..=10) as f64)).collect();
        let Ok(base) = normalize_scores("r", &raw) else { continue };
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(-50.0..50.0));
        let scaled: BTreeMap<String, f64> = raw.iter().map(|(k, v)| (k.clone(), a * v + b)).collect();
        let other = normalize_scores("r", &scaled).map_err(err)?;
        for (x, y) in base.iter().zip(&other) {
            max_rho_diff = max_rho_diff.max((x.rho - y.rho).abs());
        }
        ensure(
            generate_pairs(&base, &lk).map_err(err)? == generate_pairs(&other, &lk).map_err(err)?,
            "pairs changed under affine rescaling",
        )?;
        let ca = preference_centroid(&base, &lk, 0.25, CENTROID_EPSILON).map_err(err)?;
        let cb = preference_centroid(&other, &lk, 0.25, CENTROID_EPSILON).map_err(err)?;
        for (x, y) in ca.iter().zip(&cb) {
            max_centroid_diff = max_centroid_diff.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    ensure(max_rho_diff < 1e-12, format!("rho moved by {max_rho_diff:e} under affine rescaling"))?;
    ensure(max_centroid_diff < 1e-12, format!("centroid moved by {max_centroid_diff:e} under affine rescaling"))?;

    // Single top text: x / (1 + eps). The absolute bound of 1e-8 holds for
    // |x| < 10; larger components are checked against the exact shrinkage.
    let y = fv(0.0, 0.0);
    let s = normalize_scores("r", &scores_of(&[("a", 9.0), ("b", 1.0)])).map_err(err)?;
    let small = FeatureVector(std::array::from_fn(|j| (j as f64 - 8.0) * 1.1));
    let large = FeatureVector(std::array::from_fn(|j| (j as f64 - 8.0) * 250.0));
    let mut near: f64 = 0.0;
    let mut shrink: f64 = 0.0;
    for x in [&small, &large] {
        let lk: BTreeMap<&str, &FeatureVector> = [("a", x), ("b", &y)].into_iter().collect();
        let c = preference_centroid(&s, &lk, 0.25, CENTROID_EPSILON).map_err(err)?;
        for (u, v) in c.iter().zip(&x.0) {
            shrink = shrink.max((u - v / (1.0 + CENTROID_EPSILON)).abs() / v.abs().max(1.0));
            if std::ptr::eq(x, &small) {
                near = near.max((u - v).abs());
            }
        }
    }
    ensure(near < 1e-8, format!("single-text centroid off by {near:e}"))?;
    ensure(shrink < 1e-15, format!("single-text centroid deviates from x/(1+eps) by {shrink:e}"))?;

    // Weighted mean: rho {1, 0.5}, first components 1 and 4 give 2.
    let (xa, xb, xc) = (fv(1.0, 0.0), fv(4.0, 0.0), fv(100.0, 0.0));
    let lk: BTreeMap<&str, &FeatureVector> = [("a", &xa), ("b", &xb), ("c", &xc)].into_iter().collect();
    let s = normalize_scores("r", &scores_of(&[("a", 3.0), ("b", 2.0), ("c", 1.0)])).map_err(err)?;
    let c = preference_centroid(&s, &lk, 2.0 / 3.0, CENTROID_EPSILON).map_err(err)?;
    ensure((c[0] - 2.0).abs() < 1e-8, format!("weighted centroid {} != 2.0", c[0]))?;

    Ok(Outcome::Pass(format!(
        "endpoints exact; 200 random readers: max |d rho| = {max_rho_diff:.1e}, max relative |d centroid| = {max_centroid_diff:.1e}; \
         single-text |d| = {near:.1e}"
    )))
}

fn pairwise_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut total_pairs, mut total_ties) = (0, 0);
    for reader in 0..100 {
        let n = rng.random_range(2..25);
        let feats: Vec<(String, FeatureVector)> = (0..n)
            .map(|i| (format!("t{i:02}"), FeatureVector(std::array::from_fn(|_| rng.random_range(-1.0..1.0)))))
            .collect();
        let lk: BTreeMap<&str, &FeatureVector> = feats.iter().map(|(k, v)| (k.as_str(), v)).collect();
        let raw: BTreeMap<String, f64> = feats.iter().map(|(k, _)| (k.clone(), rng.random_range(1..=5) as f64)).collect();
        let scores = match normalize_scores(&format!("r{reader}"), &raw) {
            Ok(s) => s,
            Err(Error::DegenerateReader(_)) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let pairs = generate_pairs(&scores, &lk).map_err(err)?;
        let rho: BTreeMap<&str, f64> = scores.iter().map(|s| (s.text_id.as_str(), s.rho)).collect();
        let mut untied = 0;
        let mut ties = 0;
        for i in 0..scores.len() {
            for j in i + 1..scores.len() {
                if scores[i].rho == scores[j].rho {
                    ties += 1;
                } else {
                    untied += 1;
                }
            }
        }
        ensure(pairs.len() == 2 * untied, format!("reader {reader}: {} instances for {untied} untied pairs", pairs.len()))?;
        let positives = pairs.iter().filter(|p| p.label == 1).count();
        ensure(2 * positives == pairs.len(), format!("reader {reader}: {positives} positives of {}", pairs.len()))?;
        for p in &pairs {
            ensure(rho[p.pair_key.0.as_str()] != rho[p.pair_key.1.as_str()], format!("reader {reader}: tied pair emitted"))?;
            let mirror = pairs
                .iter()
                .filter(|q| q.pair_key == p.pair_key && q.forward != p.forward)
                .collect::<Vec<_>>();
            ensure(
                mirror.len() == 1 && mirror[0].label == 1 - p.label && mirror[0].delta == p.delta.map(|v| -v),
                format!("reader {reader}: missing or malformed mirror for {:?}", p.pair_key),
            )?;
        }
        total_pairs += untied;
        total_ties += ties;
    }
    Ok(Outcome::Pass(format!(
        "100 readers: {total_pairs} untied pairs mirrored with 50/50 labels, {total_ties} tied pairs emitted nothing"
    )))
}

// ---------------------------------------------------------- numerics

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| a[i][i]).collect();
    let vectors = (0..n).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Brute-force PCA: covariance by explicit sums, Jacobi eigenpairs sorted
/// by decreasing eigenvalue, largest-magnitude loading positive.
fn oracle_pca(x: &DMatrix<f64>, standardize: bool) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (n, d) = x.shape();
    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect();
    for c in cols.iter_mut() {
        let m = c.iter().sum::<f64>() / n as f64;
        c.iter_mut().for_each(|v| *v -= m);
        if standardize {
            let sd = (c.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                c.iter_mut().for_each(|v| *v /= sd);
            }
        }
    }
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|a| (0..d).map(|b| cols[a].iter().zip(&cols[b]).map(|(u, v)| u * v).sum::<f64>() / (n - 1) as f64).collect())
        .collect();
    let (vals, vecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let vecs = order
        .iter()
        .map(|&k| {
            let v = &vecs[k];
            let lead = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
            let s = v[lead].signum();
            v.iter().map(|x| x * s).collect()
        })
        .collect();
    (order.iter().map(|&k| vals[k]).collect(), vecs)
}

fn pca_kmeans_numerics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for (n, d, standardize) in [(40, 6, false), (40, 6, true), (60, NUM_FEATURES, true), (25, 4, false)] {
        // Correlated columns on very different scales.
        let base = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
        let mix = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rng.random_range(-0.5..0.5) });
        let mut x = base * mix;
        for j in 0..d {
            x.column_mut(j).scale_mut(10f64.powi(j as i32 % 4));
        }
        let pca = fit_pca(&x, d.min(n - 1), standardize).map_err(err)?;
        let (vals, vecs) = oracle_pca(&x, standardize);
        for k in 0..pca.components.len() {
            let scale = vals[0].abs().max(1.0);
            worst = worst.max((pca.explained_variance[k] - vals[k]).abs() / scale);
            for (a, b) in pca.components[k].iter().zip(&vecs[k]) {
                worst = worst.max((a - b).abs());
            }
        }
        let r = &pca.explained_variance_ratio;
        ensure(r.iter().all(|v| *v >= 0.0) && r.windows(2).all(|w| w[1] <= w[0]), format!("ratios not non-increasing: {r:?}"))?;
        ensure(r.iter().sum::<f64>() <= 1.0 + 1e-12, "ratios sum above 1")?;
    }
    ensure(worst < 1e-8, format!("PCA differs from the brute-force oracle by {worst:e}"))?;

    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (label, centre) in [(0usize, 0.0), (1, 10.0)] {
        for _ in 0..50 {
            pts.push(vec![centre + noise.sample(&mut rng), centre + noise.sample(&mut rng)]);
            truth.push(label);
        }
    }
    let km = kmeans(&pts, 2, 3, 10).map_err(err)?;
    let ari = adjusted_rand_index(&km.assignments, &truth).map_err(err)?;
    ensure(ari == 1.0, format!("two-blob ARI = {ari}"))?;
    Ok(Outcome::Pass(format!("max deviation from Jacobi oracle {worst:.1e}; two-blob ARI = {ari}")))
}
// ---------------------------------------------------------------- learners

/// Pair instances from a labelling rule on random deltas. `mirror_flip`
/// gives the usual (d, y), (-d, 1 - y) mirrors; otherwise the reflected
/// delta keeps the label.
fn planted_pairs(n: usize, seed: u64, rule: fn(&[f64; NUM_FEATURES]) -> bool, mirror_flip: bool) -> Vec<PairInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let d: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.random::<f64>() * 2.0 - 1.0);
        let label = u8::from(rule(&d));
        let key = PairKey::new(&format!("a{i:04}"), &format!("b{i:04}"));
        out.push(PairInstance {
            reader_id: "oracle".into(),
            pair_key: key.clone(),
            delta: d,
            label,
            forward: true,
        });
        out.push(PairInstance {
            reader_id: "oracle".into(),
            pair_key: key,
            delta: d.map(|v| -v),
            label: if mirror_flip { 1 - label } else { label },
            forward: false,
        });
    }
    out
}

/// Forest configuration of the learner oracle. Without bootstrap every
/// tree sees both orientations of each pair.
fn oracle_forest() -> ForestHyperparams {
    ForestHyperparams {
        bootstrap: false,
        ..ForestHyperparams::default()
    }
}

fn learner_oracle() -> Check {
    let split = SplitConfig::default();
    let mode = TrainMode::Fixed(oracle_forest());

    // 250 pairs: 200 train / 50 test after the 80/20 group split.
    let sep = planted_pairs(250, 101, |d| d[0] > 0.0, true);
    let fit = fit_reader("oracle", "oracle", &sep, &mode, &split, 7).map_err(|e| e.to_string())?;
    let sep_f1 = fit.profile.test_f1;
    let mdi0 = fit.profile.importances[0];
    let boot = fit_reader("oracle", "oracle", &sep, &TrainMode::Fixed(ForestHyperparams::default()), &split, 7)
        .map_err(|e| e.to_string())?;

    let xor = planted_pairs(1000, 202, |d| d[0] * d[1] > 0.0, false);
    let xfit = fit_reader("oracle", "oracle", &xor, &mode, &split, 7).map_err(|e| e.to_string())?;
    let logit = fit_logistic_baseline(&xor, &split, 7).map_err(|e| e.to_string())?;

    let detail = format!(
        "separable F1={sep_f1:.4} MDI0={mdi0:.4} (bootstrap forest MDI0={:.4}, informational); \
         xor forest F1={:.4} logistic F1={:.4}",
        boot.profile.importances[0], xfit.profile.test_f1, logit.test_f1
    );
    ensure(sep_f1 >= 0.95, format!("separable F1 < 0.95: {detail}"))?;
    ensure(mdi0 >= 0.8, format!("MDI(feature 0) < 0.8: {detail}"))?;
    ensure(xfit.profile.test_f1 >= 0.8, format!("xor forest F1 < 0.8: {detail}"))?;
    ensure(logit.test_f1 <= 0.6, format!("xor logistic F1 > 0.6: {detail}"))?;
    Ok(Outcome::Pass(detail))
}

// ------------------------------------------------------------ end-to-end

fn end_to_end_recovery() -> Check {
    let spec = ExperimentSpec {
        n_texts: 200,
        readers_per_archetype: 30,
        ..ExperimentSpec::default()
    };
    let seed = 42;
    let corpus = generate_corpus(spec.n_texts, seed, &CorpusSpec::Uniform).map_err(|e| e.to_string())?;
    let clean = run_level(&spec, &corpus.table, 0.0, 0, seed).map_err(|e| e.to_string())?.report;
    let noisy = run_level(&spec, &corpus.table, 0.25, 0, seed).map_err(|e| e.to_string())?.report;
    let detail = format!(
        "sigma=0: ARI={:.4} recall@3={:.4} readers={}; sigma=0.25: ARI={:.4} recall@3={:.4}",
        clean.ari,
        clean.mean_recall,
        clean.readers.len(),
        noisy.ari,
        noisy.mean_recall
    );
    ensure(clean.readers.len() == 60, format!("expected 60 modeled readers: {detail}"))?;
    ensure(clean.ari >= 0.9, format!("sigma=0 ARI < 0.9: {detail}"))?;
    ensure(clean.mean_recall >= 0.9, format!("sigma=0 recall@3 < 0.9: {detail}"))?;
    ensure(noisy.ari >= 0.7, format!("sigma=0.25 ARI < 0.7: {detail}"))?;
    Ok(Outcome::Pass(detail))
}

// ---------------------------------------------------------------- CLI

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).join("manifest.toml")
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        } else {
            out.push(p.strip_prefix(dir).unwrap().to_path_buf());
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: Vec<PathBuf> = ["run1", "run2"].iter().map(|r| tmp.path().join(r)).collect();
    for out in &runs {
        let o = Command::new(env!("CARGO_BIN_EXE_litpref"))
            .arg("--out-dir")
            .arg(out)
            .arg("report")
            .arg("--dataset")
            .arg(fixture("small"))
            .env("RUST_LOG", "warn")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(o.status.success(), format!("report failed: {}", String::from_utf8_lossy(&o.stderr)))?;
    }
    let (a, b) = (files_under(&runs[0]), files_under(&runs[1]));
    ensure(a == b, "runs produced different file sets")?;
    let mut differing = Vec::new();
    for f in &a {
        if std::fs::read(runs[0].join(f)).ok() != std::fs::read(runs[1].join(f)).ok() {
            differing.push(f.display().to_string());
        }
    }
    ensure(differing.is_empty(), format!("differing artifacts: {differing:?}"))?;
    Ok(Outcome::Pass(format!("full report run twice: {} artifacts byte-identical", a.len())))
}

// -------------------------------------------------------- conditional

/// The premise (a public corpus with a completed annotation run) is not
/// available offline, so this exercises the same code path on the bundled
/// fixture and reports the criterion as not applicable.
fn conditional_real_data() -> Check {
    let dataset = load_dataset(&fixture("small")).map_err(err)?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig::default();
    pipeline::run_extract(&dataset, &cfg, tmp.path()).map_err(err)?;
    pipeline::run_prefs(&dataset, &cfg, tmp.path()).map_err(err)?;
    let scores = pipeline::read_scores(&tmp.path().join(pipeline::SCORES_FILE)).map_err(err)?;
    let rate = ai_preference_rate(&scores, &dataset.authorship(), &RateScope::Dataset).map_err(err)?;
    let features = litpref::io::read_features(&tmp.path().join(pipeline::FEATURES_FILE)).map_err(err)?;
    let corr = correlation_matrix(&features.matrix().map_err(err)?).map_err(err)?;
    let report = redundancy_report(&corr, &FEATURE_NAMES, 0.7);
    Ok(Outcome::NotApplicable(format!(
        "no public corpus in the workspace; on the bundled fixture ai_preference_rate = {rate:.2}% and the \
         redundancy report at 0.7 lists {} pair(s)",
        report.len()
    )))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "metric golden suite",
            budget: Duration::from_secs(5),
            run: metric_golden_suite,
        },
        Criterion {
            name: "formula bounds property suite",
            budget: Duration::from_secs(30),
            run: formula_bounds,
        },
        Criterion {
            name: "normalization and centroid suite",
            budget: Duration::from_secs(5),
            run: normalization_and_centroid,
        },
        Criterion {
            name: "pairwise contract",
            budget: Duration::from_secs(5),
            run: pairwise_contract,
        },
        Criterion {
            name: "learner oracle",
            budget: Duration::from_secs(120),
            run: learner_oracle,
        },
        Criterion {
            name: "PCA/k-means numerics",
            budget: Duration::from_secs(10),
            run: pca_kmeans_numerics,
        },
        Criterion {
            name: "end-to-end perspectivist recovery",
            budget: Duration::from_secs(300),
            run: end_to_end_recovery,
        },
        Criterion {
            name: "determinism",
            budget: Duration::from_secs(600),
            run: cli_determinism,
        },
        Criterion {
            name: "real-data rates and redundancy (conditional)",
            budget: Duration::from_secs(120),
            run: conditional_real_data,
        },
    ];
    let (mut passed, mut failed, mut skipped) = (0, 0, 0);
    for c in &criteria {
        let start = Instant::now();
        let result = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let over = start.elapsed() > c.budget;
        match result {
            Ok(_) if over => {
                failed += 1;
                println!("FAIL  {} ({secs:.2}s): budget of {}s exceeded", c.name, c.budget.as_secs());
            }
            Ok(Outcome::Pass(detail)) => {
                passed += 1;
                println!("PASS  {} ({secs:.2}s): {detail}", c.name);
            }
            Ok(Outcome::NotApplicable(detail)) => {
                skipped += 1;
                println!("N/A   {} ({secs:.2}s): {detail}", c.name);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL  {} ({secs:.2}s): {e}", c.name);
            }
        }
    }
    println!("acceptance: {passed} passed, {failed} failed, {skipped} not applicable");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
