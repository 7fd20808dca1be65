mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use litpref::analysis::{ai_preference_rate, fit_pca, kmeans, RateScope};
use litpref::learners::{train_forest, ForestHyperparams, TrainedForest};
use litpref::metrics::{entropy_normalized, extract_features, mtld_tokens, sentiment_stats, MetricContext};
use litpref::model::{validate_bundle, AnnotationBundle, AuthorKind, FeatureVector, NUM_FEATURES};
use litpref::prefs::{generate_pairs, normalize_scores, preference_centroid, CENTROID_EPSILON};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_features(seed: u64, n: usize) -> Vec<(String, FeatureVector)> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| (format!("t{i:03}"), FeatureVector(std::array::from_fn(|_| r.random_range(-5.0..5.0)))))
        .collect()
}

fn lookup(f: &[(String, FeatureVector)]) -> BTreeMap<&str, &FeatureVector> {
    f.iter().map(|(id, v)| (id.as_str(), v)).collect()
}

/// Integer-valued raw scores so that ties occur.
fn raw_scores(seed: u64, n: usize) -> BTreeMap<String, f64> {
    let mut r = rng(seed);
    (0..n).map(|i| (format!("t{i:03}"), r.random_range(1..=7) as f64)).collect()
}

fn antisymmetry_forest() -> &'static TrainedForest {
    static FOREST: OnceLock<TrainedForest> = OnceLock::new();
    FOREST.get_or_init(|| {
        let mut r = rng(5);
        let x: Vec<[f64; NUM_FEATURES]> = (0..200).map(|_| std::array::from_fn(|_| r.random_range(-1.0..1.0))).collect();
        let y: Vec<u8> = x.iter().map(|d| u8::from(d[0] + 0.3 * d[1] * d[2] > 0.0)).collect();
        let hp = ForestHyperparams {
            n_estimators: 25,
            ..ForestHyperparams::default()
        };
        litpref::learners::forest::train_forest_xy(&x, &y, &hp, 11).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn feature_ranges_hold_for_valid_bundles(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = common::random_bundle(&mut r, "t");
        let topics = common::random_topics(&mut r);
        let text = common::text_record("t");
        prop_assert!(validate_bundle(&b, &text).is_empty());
        let e = extract_features(&text, &MetricContext::new(&b, Some(&topics))).unwrap();
        prop_assert!(e.features.range_violations().is_empty(), "{:?}", e.features.range_violations());
        let again = extract_features(&text, &MetricContext::new(&b, Some(&topics))).unwrap();
        prop_assert_eq!(e.features.0.map(f64::to_bits), again.features.0.map(f64::to_bits));
    }

    #[test]
    fn bundle_round_trips_through_json(seed in any::<u64>()) {
        let b = common::random_bundle(&mut rng(seed), "t");
        let back: AnnotationBundle = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn mtld_is_invariant_under_type_relabeling(tokens in prop::collection::vec(0u8..6, 1..80), shift in 1u8..50) {
        let a: Vec<String> = tokens.iter().map(|t| format!("w{t}")).collect();
        let b: Vec<String> = tokens.iter().map(|t| format!("x{}", t.wrapping_add(shift))).collect();
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let b: Vec<&str> = b.iter().map(String::as_str).collect();
        prop_assert_eq!(mtld_tokens(&a).unwrap(), mtld_tokens(&b).unwrap());
    }

    #[test]
    fn entropy_is_permutation_invariant(raw in prop::collection::vec(0.0f64..1.0, 2..10), seed in any::<u64>()) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 1e-6);
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let mut q = p.clone();
        q.shuffle(&mut rng(seed));
        let (hp, hq) = (entropy_normalized(&p).unwrap(), entropy_normalized(&q).unwrap());
        prop_assert!((hp - hq).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&hp));
    }

    #[test]
    fn sentiment_variance_identity(seed in any::<u64>()) {
        let b = common::random_bundle(&mut rng(seed), "t");
        let (mean, var) = sentiment_stats(&MetricContext::new(&b, None)).unwrap();
        let s: Vec<f64> = b.chunks.iter().map(|c| c.sentiment).collect();
        let msq = s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64;
        prop_assert!((var - (msq - mean * mean)).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_affine_invariant_and_idempotent(seed in any::<u64>(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let feats = random_features(seed, 12);
        let lk = lookup(&feats);
        let raw = raw_scores(seed, 12);
        let Ok(base) = normalize_scores("r", &raw) else { return Ok(()) };
        let scaled: BTreeMap<String, f64> = raw.iter().map(|(k, v)| (k.clone(), a * v + b)).collect();
        let other = normalize_scores("r", &scaled).unwrap();
        for (x, y) in base.iter().zip(&other) {
            prop_assert!((x.rho - y.rho).abs() < 1e-12);
        }
        prop_assert_eq!(base.iter().map(|s| s.rho).fold(f64::INFINITY, f64::min), 0.0);
        prop_assert_eq!(base.iter().map(|s| s.rho).fold(0.0, f64::max), 1.0);
        let pa = generate_pairs(&base, &lk).unwrap();
        let pb = generate_pairs(&other, &lk).unwrap();
        prop_assert_eq!(&pa, &pb);
        let ca = preference_centroid(&base, &lk, 0.25, CENTROID_EPSILON).unwrap();
        let cb = preference_centroid(&other, &lk, 0.25, CENTROID_EPSILON).unwrap();
        for (x, y) in ca.iter().zip(&cb) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let rho: BTreeMap<String, f64> = base.iter().map(|s| (s.text_id.clone(), s.rho)).collect();
        let again = normalize_scores("r", &rho).unwrap();
        prop_assert_eq!(again.iter().map(|s| s.rho).collect::<Vec<_>>(), base.iter().map(|s| s.rho).collect::<Vec<_>>());
    }

    #[test]
    fn centroid_lies_within_feature_range(seed in any::<u64>()) {
        let feats = random_features(seed, 10);
        let lk = lookup(&feats);
        let Ok(scores) = normalize_scores("r", &raw_scores(seed ^ 1, 10)) else { return Ok(()) };
        let c = preference_centroid(&scores, &lk, 0.25, CENTROID_EPSILON).unwrap();
        for j in 0..NUM_FEATURES {
            let lo = feats.iter().map(|(_, v)| v.0[j]).fold(f64::INFINITY, f64::min);
            let hi = feats.iter().map(|(_, v)| v.0[j]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(c[j] >= lo - 1e-6 && c[j] <= hi + 1e-6);
        }
    }

    #[test]
    fn pairs_are_mirrored_and_balanced(seed in any::<u64>()) {
        let feats = random_features(seed, 9);
        let lk = lookup(&feats);
        let Ok(scores) = normalize_scores("r", &raw_scores(seed, 9)) else { return Ok(()) };
        let pairs = generate_pairs(&scores, &lk).unwrap();
        prop_assert_eq!(pairs.len() % 2, 0);
        prop_assert_eq!(pairs.iter().filter(|p| p.label == 1).count() * 2, pairs.len());
        for w in pairs.chunks(2) {
            prop_assert_eq!(&w[0].pair_key, &w[1].pair_key);
            prop_assert_eq!(w[0].label + w[1].label, 1);
            prop_assert_eq!(w[0].delta.map(|v| -v), w[1].delta);
        }
        let rho: BTreeMap<&str, f64> = scores.iter().map(|s| (s.text_id.as_str(), s.rho)).collect();
        prop_assert!(pairs.iter().all(|p| rho[p.pair_key.0.as_str()] != rho[p.pair_key.1.as_str()]));
    }

    #[test]
    fn ai_rate_is_affine_invariant(seed in any::<u64>(), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let raw = raw_scores(seed, 10);
        let authors: BTreeMap<String, AuthorKind> = raw
            .keys()
            .enumerate()
            .map(|(i, k)| (k.clone(), if i % 2 == 0 { AuthorKind::Ai } else { AuthorKind::Human }))
            .collect();
        let Ok(base) = normalize_scores("r", &raw) else { return Ok(()) };
        let scaled: BTreeMap<String, f64> = raw.iter().map(|(k, v)| (k.clone(), a * v + b)).collect();
        let other = normalize_scores("r", &scaled).unwrap();
        let x = ai_preference_rate(&base, &authors, &RateScope::Dataset).ok();
        let y = ai_preference_rate(&other, &authors, &RateScope::Dataset).ok();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn predict_pair_is_exactly_antisymmetric(seed in any::<u64>()) {
        let forest = antisymmetry_forest();
        let mut r = rng(seed);
        let a = FeatureVector(std::array::from_fn(|_| r.random_range(-2.0..2.0)));
        let b = FeatureVector(std::array::from_fn(|_| r.random_range(-2.0..2.0)));
        let (p, q) = (forest.predict_pair(&a, &b), forest.predict_pair(&b, &a));
        prop_assert_eq!(p, 1.0 - q);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn kmeans_inertia_never_increases(seed in any::<u64>()) {
        let mut r = rng(seed);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let km = kmeans(&pts, 3, seed, 3).unwrap();
        prop_assert!(km.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn pca_reconstructs_with_all_components(seed in any::<u64>(), standardize in any::<bool>()) {
        let mut r = rng(seed);
        let (n, d) = (12, 4);
        let x = DMatrix::from_fn(n, d, |_, j| r.random_range(-1.0..1.0) * (j + 1) as f64);
        let pca = fit_pca(&x, d, standardize).unwrap();
        for i in 0..n {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let back = pca.inverse_transform(&pca.transform(&row).unwrap()).unwrap();
            for (u, v) in row.iter().zip(&back) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn train_forest_on_mirrored_pairs_is_deterministic() {
    let feats = random_features(3, 15);
    let lk = lookup(&feats);
    let scores = normalize_scores("r", &raw_scores(4, 15)).unwrap();
    let pairs = generate_pairs(&scores, &lk).unwrap();
    let hp = ForestHyperparams {
        n_estimators: 10,
        ..ForestHyperparams::default()
    };
    let a = serde_json::to_string(&train_forest(&pairs, &hp, 9).unwrap()).unwrap();
    let b = serde_json::to_string(&train_forest(&pairs, &hp, 9).unwrap()).unwrap();
    assert_eq!(a, b);
}
