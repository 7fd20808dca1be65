//! Cluster membership, radar tables, AI-preference rates and hulls.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AuthorKind, PreferenceScore, ReaderProfile, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipRow {
    pub dataset: String,
    pub counts: Vec<usize>,
    pub shares: Vec<f64>,
}

/// Per-dataset reader counts per cluster. `datasets` lists groups that
/// must appear even without clustered readers.
pub fn cluster_membership_report(profiles: &[ReaderProfile], k: usize, datasets: &[String]) -> Result<Vec<MembershipRow>> {
    let mut counts: BTreeMap<String, Vec<usize>> = datasets.iter().map(|d| (d.clone(), vec![0; k])).collect();
    for p in profiles {
        let Some(c) = p.cluster else { continue };
        if c >= k {
            return Err(Error::Invalid(format!("reader {} has cluster {c} >= {k}", p.reader_id)));
        }
        counts.entry(p.dataset.clone()).or_insert_with(|| vec![0; k])[c] += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(dataset, counts)| {
            let total: usize = counts.iter().sum();
            let shares = counts
                .iter()
                .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect();
            MembershipRow { dataset, counts, shares }
        })
        .collect())
}

/// Componentwise mean importance vector of every cluster.
pub fn radar_table(importances: &[[f64; NUM_FEATURES]], assignments: &[usize], k: usize) -> Result<Vec<[f64; NUM_FEATURES]>> {
    if importances.len() != assignments.len() {
        return Err(Error::Dimension {
            expected: importances.len(),
            got: assignments.len(),
        });
    }
    let mut sums = vec![[0.0; NUM_FEATURES]; k];
    let mut counts = vec![0usize; k];
    for (v, &a) in importances.iter().zip(assignments) {
        if a >= k {
            return Err(Error::Invalid(format!("assignment {a} >= {k}")));
        }
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(v) {
            *s += x;
        }
    }
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Invalid(format!("cluster {c} is empty")));
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| s.map(|v| v / c as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RateScope<'a> {
    Dataset,
    Reader(&'a str),
}

/// Wins and comparisons of AI texts against human texts for one reader.
fn reader_tally(scores: &[&PreferenceScore], authorship: &BTreeMap<String, AuthorKind>) -> (usize, usize) {
    let mut ai = Vec::new();
    let mut human = Vec::new();
    for s in scores {
        match authorship.get(&s.text_id) {
            Some(AuthorKind::Ai) => ai.push(s.rho),
            Some(AuthorKind::Human) => human.push(s.rho),
            None => {}
        }
    }
    let mut wins = 0;
    let mut comparisons = 0;
    for &a in &ai {
        for &h in &human {
            if a != h {
                comparisons += 1;
                wins += usize::from(a > h);
            }
        }
    }
    (wins, comparisons)
}

fn by_reader(scores: &[PreferenceScore]) -> BTreeMap<&str, Vec<&PreferenceScore>> {
    let mut out: BTreeMap<&str, Vec<&PreferenceScore>> = BTreeMap::new();
    for s in scores {
        out.entry(s.reader_id.as_str()).or_default().push(s);
    }
    out
}

/// Percentage of untied (reader, AI text, human text) comparisons won by
/// the AI text.
pub fn ai_preference_rate(
    scores: &[PreferenceScore],
    authorship: &BTreeMap<String, AuthorKind>,
    scope: &RateScope,
) -> Result<f64> {
    let groups = by_reader(scores);
    let (mut wins, mut total) = (0, 0);
    for (reader, s) in &groups {
        if let RateScope::Reader(r) = scope {
            if reader != r {
                continue;
            }
        }
        let (w, c) = reader_tally(s, authorship);
        wins += w;
        total += c;
    }
    if total == 0 {
        return Err(Error::InsufficientData("no comparable AI/human pairs".into()));
    }
    Ok(100.0 * wins as f64 / total as f64)
}

/// Per-reader rates; readers without comparable pairs map to `None`.
pub fn reader_ai_rates(
    scores: &[PreferenceScore],
    authorship: &BTreeMap<String, AuthorKind>,
) -> BTreeMap<String, Option<f64>> {
    by_reader(scores)
        .into_iter()
        .map(|(r, s)| {
            let (w, c) = reader_tally(&s, authorship);
            (r.to_owned(), (c > 0).then(|| 100.0 * w as f64 / c as f64))
        })
        .collect()
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by monotone chain, counter-clockwise from the lowest-left
/// point, without collinear vertices.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
