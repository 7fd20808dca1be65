//! Random valid bundles and topic outputs shared by the property and
//! acceptance tests.
#![allow(dead_code)]

use litpref::metrics::TopicOutputs;
use litpref::model::{
    AnnotationBundle, AuthorKind, ChunkAnnotation, Role, SentenceAnnotation, TextRecord, RHETORICAL_INVENTORY,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

const WORDS: [&str; 16] = [
    "the", "river", "quietly", "remembered", "an", "extraordinary", "winter", "of", "her", "mother",
    "and", "unbelievable", "light", "was", "in", ",",
];
const EMOTIONS: [&str; 4] = ["joy", "sadness", "anger", "neutral"];
const ENTITIES: [&str; 5] = ["anna", "river", "house", "letter", "father"];

pub fn text_record(id: &str) -> TextRecord {
    TextRecord {
        text_id: id.into(),
        dataset: "prop".into(),
        author_kind: AuthorKind::Human,
        model_name: None,
        language: "en".into(),
        body: "body".into(),
    }
}

/// A bundle satisfying every schema invariant, with at least two sentences
/// and two chunks so that every metric is defined.
pub fn random_bundle<R: Rng>(rng: &mut R, text_id: &str) -> AnnotationBundle {
    let n_sent = rng.random_range(2..40);
    let dim = rng.random_range(1..6);
    let roles = [Role::S, Role::O, Role::X];
    let sentences: Vec<SentenceAnnotation> = (0..n_sent)
        .map(|_| {
            let len = rng.random_range(1..25);
            let sub = rng.random_range(0..5);
            // Occasionally emit an all-zero embedding.
            let zero = rng.random::<f64>() < 0.05;
            SentenceAnnotation {
                tokens: (0..len).map(|_| WORDS.choose(rng).unwrap().to_string()).collect(),
                parse_depth: sub + rng.random_range(0..5),
                subordination_depth: sub,
                embedding: (0..dim)
                    .map(|_| if zero { 0.0 } else { rng.random_range(-1.0..1.0) })
                    .collect(),
                entities: (0..rng.random_range(0..4))
                    .map(|_| (ENTITIES.choose(rng).unwrap().to_string(), *roles.choose(rng).unwrap()))
                    .collect(),
            }
        })
        .collect();
    let n: usize = sentences.iter().map(|s| s.tokens.len()).sum();
    let n_chunks = rng.random_range(2..=n.clamp(2, 12));
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(n_chunks - 1).collect();
    cuts.sort_unstable();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    let chunks = bounds
        .windows(2)
        .map(|w| ChunkAnnotation {
            token_span: [w[0], w[1]],
            sentiment: rng.random_range(-1.0..=1.0),
            dominant_emotion: EMOTIONS.choose(rng).unwrap().to_string(),
        })
        .collect();
    let mut devices = std::collections::BTreeMap::new();
    for d in RHETORICAL_INVENTORY {
        if rng.random::<bool>() {
            devices.insert(d.to_string(), rng.random_range(0..4));
        }
    }
    let with_syllables = rng.random::<bool>();
    AnnotationBundle {
        text_id: text_id.into(),
        schema_version: "1".into(),
        sentences,
        chunks,
        token_logprobs: (0..n).map(|_| -rng.random_range(0.0..12.0)).collect(),
        rhetorical_device_counts: devices,
        syllable_counts: with_syllables.then(|| (0..n).map(|_| rng.random_range(1..6)).collect()),
    }
}

fn simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Topic outputs satisfying their invariants.
pub fn random_topics<R: Rng>(rng: &mut R) -> TopicOutputs {
    let k = rng.random_range(2..=10);
    let m = rng.random_range(2..=10);
    let c = rng.random_range(1..=8);
    let max_edges = c * (c - 1) / 2;
    TopicOutputs {
        k_star: k,
        section_topic_vectors: (0..m).map(|_| simplex(rng, k)).collect(),
        theme_proportions: simplex(rng, c),
        theme_graph: (c, rng.random_range(0..=max_edges)),
    }
}
