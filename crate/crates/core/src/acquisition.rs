//! Baseline query strategies.
//!
//! Every score follows one convention: higher means more informative. Margin
//! is negated to fit it.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Sample, SampleId};
use crate::learner::{GradientEmbedding, Model, ProbabilityVector};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionScore {
    pub sample: SampleId,
    pub value: f64,
}

/// Sample ids, most informative first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ranking(pub Vec<SampleId>);

impl Ranking {
    pub fn ids(&self) -> &[SampleId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<SampleId> {
        self.0
    }
}

/// `-Σ p ln p` with `0 ln 0 = 0`. A uniform posterior returns `ln C`
/// directly, which the summed form misses by an ulp for some `C`.
pub fn score_entropy(p: &ProbabilityVector) -> f64 {
    let v = p.values();
    if v.iter().all(|&x| x == v[0]) {
        return (v.len() as f64).ln();
    }
    -v
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// Negated gap between the two largest posteriors.
pub fn score_margin(p: &ProbabilityVector) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &x in p.values() {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    -(first - second)
}

pub fn score_least_confidence(p: &ProbabilityVector) -> f64 {
    1.0 - p.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn by_score_then_id(a: &AcquisitionScore, b: &AcquisitionScore) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then_with(|| a.sample.cmp(&b.sample))
}

/// The `k` highest scores, ties broken by ascending id.
pub fn select_top_k(scores: &[AcquisitionScore], k: usize) -> Result<Ranking> {
    if k > scores.len() {
        return Err(Error::usage(format!(
            "cannot select {k} of {} scored candidates",
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.value.is_finite()) {
        return Err(Error::usage(format!("non-finite score for sample {}", s.sample)));
    }
    let mut sorted = scores.to_vec();
    if k < sorted.len() && k > 0 {
        sorted.select_nth_unstable_by(k - 1, by_score_then_id);
        sorted.truncate(k);
    }
    sorted.sort_by(by_score_then_id);
    sorted.truncate(k);
    Ok(Ranking(sorted.into_iter().map(|s| s.sample).collect()))
}

/// Uniform sample of `k` candidates without replacement.
pub fn select_random(candidates: &[SampleId], k: usize, seed: u64) -> Result<Ranking> {
    if k > candidates.len() {
        return Err(Error::usage(format!(
            "cannot select {k} of {} candidates",
            candidates.len()
        )));
    }
    let mut rng = seed::rng(seed);
    let picks = index::sample(&mut rng, candidates.len(), k);
    Ok(Ranking(picks.into_iter().map(|i| candidates[i]).collect()))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// One pick of the seeding walk.
pub(crate) struct SeedPick {
    pub index: usize,
    /// True when no eligible candidate remained and the pick ignored the
    /// eligibility rule.
    pub relaxed: bool,
}

/// k-means++ seeding over `points`, which must be sorted by ascending id.
///
/// The first pick is the largest-norm point among the eligible ones. Each
/// later pick is drawn with probability proportional to the squared distance
/// to the nearest picked point, restricted to candidates for which
/// `eligible(candidate, picked)` holds. If every eligible candidate has zero
/// mass, the lowest-index eligible one is taken. If no candidate is eligible,
/// the draw runs over all unpicked points and the pick is marked relaxed.
pub(crate) fn kmeanspp_seed<F>(points: &[&[f64]], k: usize, seed: u64, mut eligible: F) -> Vec<SeedPick>
where
    F: FnMut(usize, &[usize]) -> bool,
{
    let n = points.len();
    let k = k.min(n);
    let mut picks: Vec<SeedPick> = Vec::with_capacity(k);
    if k == 0 {
        return picks;
    }
    let mut rng = seed::rng(seed);
    let mut picked = vec![false; n];
    let mut picked_idx: Vec<usize> = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut weights = vec![0.0; n];

    let first = {
        let norms: Vec<f64> = points.iter().map(|p| p.iter().map(|x| x * x).sum()).collect();
        let mut best: Option<usize> = None;
        for i in 0..n {
            if eligible(i, &picked_idx) && best.is_none_or(|b| norms[i] > norms[b]) {
                best = Some(i);
            }
        }
        match best {
            Some(i) => SeedPick { index: i, relaxed: false },
            None => {
                let i = (0..n).fold(0, |b, i| if norms[i] > norms[b] { i } else { b });
                SeedPick { index: i, relaxed: true }
            }
        }
    };
    let mut next = Some(first);

    while let Some(pick) = next.take() {
        let c = pick.index;
        picked[c] = true;
        picked_idx.push(c);
        picks.push(pick);
        if picks.len() == k {
            break;
        }
        for (d, p) in min_d2.iter_mut().zip(points) {
            let dist = squared_distance(p, points[c]);
            if dist < *d {
                *d = dist;
            }
        }

        let mut any_eligible = false;
        for i in 0..n {
            let ok = !picked[i] && eligible(i, &picked_idx);
            any_eligible |= ok;
            weights[i] = if ok { min_d2[i] } else { 0.0 };
        }
        let relaxed = !any_eligible;
        if relaxed {
            for i in 0..n {
                weights[i] = if picked[i] { 0.0 } else { min_d2[i] };
            }
        }
        let total: f64 = weights.iter().sum();
        let index = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            let mut last_positive = 0;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    last_positive = i;
                    if acc > target {
                        chosen = Some(i);
                        break;
                    }
                }
            }
            chosen.unwrap_or(last_positive)
        } else if relaxed {
            (0..n).find(|&i| !picked[i]).expect("fewer than k points")
        } else {
            (0..n)
                .find(|&i| !picked[i] && eligible(i, &picked_idx))
                .expect("eligible candidate exists")
        };
        next = Some(SeedPick { index, relaxed });
    }
    picks
}

pub(crate) fn sorted_by_id(embeddings: &[(SampleId, GradientEmbedding)]) -> Vec<&(SampleId, GradientEmbedding)> {
    let mut sorted: Vec<_> = embeddings.iter().collect();
    sorted.sort_by_key(|(id, _)| *id);
    sorted
}

/// BADGE: k-means++ seeding over gradient embeddings, starting from the
/// largest-norm embedding.
pub fn select_badge(embeddings: &[(SampleId, GradientEmbedding)], k: usize, seed: u64) -> Result<Ranking> {
    if k > embeddings.len() {
        return Err(Error::usage(format!(
            "cannot select {k} of {} embeddings",
            embeddings.len()
        )));
    }
    let sorted = sorted_by_id(embeddings);
    let points: Vec<&[f64]> = sorted.iter().map(|(_, g)| g.0.as_slice()).collect();
    let picks = kmeanspp_seed(&points, k, seed, |_, _| true);
    Ok(Ranking(picks.into_iter().map(|p| sorted[p.index].0).collect()))
}

/// The five baseline query strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Entropy,
    Margin,
    LeastConfidence,
    Badge,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Random,
        Strategy::Entropy,
        Strategy::Margin,
        Strategy::LeastConfidence,
        Strategy::Badge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::LeastConfidence => "least_confidence",
            Strategy::Badge => "badge",
        }
    }

    pub fn scorer(self) -> Option<fn(&ProbabilityVector) -> f64> {
        match self {
            Strategy::Entropy => Some(score_entropy),
            Strategy::Margin => Some(score_margin),
            Strategy::LeastConfidence => Some(score_least_confidence),
            Strategy::Random | Strategy::Badge => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy `{s}`")))
    }
}

pub fn gradient_embeddings(model: &Model, candidates: &[&Sample]) -> Result<Vec<(SampleId, GradientEmbedding)>> {
    candidates
        .iter()
        .map(|s| Ok((s.id, model.gradient_embedding(&s.features)?)))
        .collect()
}

/// Dispatches to a strategy. Score-based strategies return the full ranking
/// of all candidates; random and BADGE return exactly `k`.
pub fn make_ranking(
    strategy: Strategy,
    model: &Model,
    candidates: &[&Sample],
    k: usize,
    seed: u64,
) -> Result<Ranking> {
    if k > candidates.len() {
        return Err(Error::usage(format!(
            "cannot select {k} of {} candidates",
            candidates.len()
        )));
    }
    match strategy {
        Strategy::Random => {
            let ids: Vec<SampleId> = candidates.iter().map(|s| s.id).collect();
            select_random(&ids, k, seed)
        }
        Strategy::Badge => select_badge(&gradient_embeddings(model, candidates)?, k, seed),
        scored => {
            let scorer = scored.scorer().expect("score-based strategy");
            let scores = candidates
                .iter()
                .map(|s| {
                    let p = model.predict_proba(&s.features)?;
                    Ok(AcquisitionScore {
                        sample: s.id,
                        value: scorer(&p),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            select_top_k(&scores, scores.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, PatientId};

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn score(id: u64, value: f64) -> AcquisitionScore {
        AcquisitionScore {
            sample: SampleId(id),
            value,
        }
    }

    fn ids(v: &[u64]) -> Vec<SampleId> {
        v.iter().map(|&i| SampleId(i)).collect()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(score_entropy(&pv(&[1.0 / 3.0; 3])), 3f64.ln());
        assert_eq!(score_entropy(&pv(&[0.2; 5])), 5f64.ln());
        assert_eq!(score_entropy(&pv(&[1.0, 0.0, 0.0])), 0.0);
        assert!((score_entropy(&pv(&[0.5, 0.3, 0.2])) - 1.029_653_014_064_573_5).abs() < 1e-12);
    }

    #[test]
    fn margin_values() {
        assert_eq!(score_margin(&pv(&[0.0, 1.0, 0.0])), -1.0);
        assert_eq!(score_margin(&pv(&[1.0 / 3.0; 3])), 0.0);
        assert!((score_margin(&pv(&[0.5, 0.3, 0.2])) + 0.2).abs() < 1e-15);
        assert!((score_margin(&pv(&[0.2, 0.3, 0.5])) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn least_confidence_values() {
        assert_eq!(score_least_confidence(&pv(&[0.0, 0.0, 1.0])), 0.0);
        assert!((score_least_confidence(&pv(&[1.0 / 3.0; 3])) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(score_least_confidence(&pv(&[0.5, 0.3, 0.2])), 0.5);
    }

    #[test]
    fn top_k() {
        let s = [score(0, 0.9), score(1, 0.1), score(2, 0.5)];
        assert_eq!(select_top_k(&s, 2).unwrap().0, ids(&[0, 2]));
        assert_eq!(select_top_k(&s, 3).unwrap().0, ids(&[0, 2, 1]));
        let tie = [score(1, 0.5), score(0, 0.5)];
        assert_eq!(select_top_k(&tie, 1).unwrap().0, ids(&[0]));
        assert!(select_top_k(&s, 4).is_err());
        assert!(select_top_k(&s, 0).unwrap().is_empty());
    }

    #[test]
    fn random_selection() {
        let c = ids(&[3, 5, 7, 9]);
        let mut all = select_random(&c, 4, 7).unwrap().0;
        all.sort();
        assert_eq!(all, c);
        assert_eq!(select_random(&c, 2, 11).unwrap(), select_random(&c, 2, 11).unwrap());
        assert!(select_random(&c, 5, 0).is_err());
    }

    #[test]
    fn random_is_uniform() {
        let c = ids(&[0, 1, 2, 3]);
        let mut counts = [0usize; 4];
        let reps = 10_000;
        for seed in 0..reps {
            let pick = select_random(&c, 1, seed).unwrap().0[0];
            counts[pick.0 as usize] += 1;
        }
        for n in counts {
            let f = n as f64 / reps as f64;
            assert!((f - 0.25).abs() <= 0.02, "frequency {f}");
        }
    }

    fn emb(id: u64, v: &[f64]) -> (SampleId, GradientEmbedding) {
        (SampleId(id), GradientEmbedding(v.to_vec()))
    }

    #[test]
    fn badge_first_pick_is_max_norm() {
        let e = [emb(0, &[1.0, 0.0]), emb(1, &[0.0, 3.0]), emb(2, &[-3.0, 0.0])];
        // ids 1 and 2 tie on norm, lower id wins
        assert_eq!(select_badge(&e, 1, 0).unwrap().0, ids(&[1]));
    }

    #[test]
    fn badge_point_masses() {
        let mut e = Vec::new();
        for i in 0..5 {
            e.push(emb(i, &[0.0, 0.0]));
            e.push(emb(10 + i, &[5.0, 5.0]));
        }
        for seed in 0..20 {
            let r = select_badge(&e, 2, seed).unwrap().0;
            assert!(r[0].0 >= 10, "max norm cluster first");
            assert!(r[1].0 < 10, "second pick from the other cluster");
        }
        let mut all = select_badge(&e, e.len(), 3).unwrap().0;
        all.sort();
        assert_eq!(all.len(), 10);
        all.dedup();
        assert_eq!(all.len(), 10);
        assert!(select_badge(&e, 11, 0).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("coreset".parse::<Strategy>().is_err());
    }

    #[test]
    fn entropy_ranking_over_posteriors() {
        // linear model with bias only; posteriors set per sample via the feature
        // that selects one of three bias-like columns.
        let mut m = Model::zeros(3, 0, 3);
        let big = 1000.0;
        let (a, b) = (0.3f64.ln() - 0.5f64.ln(), 0.2f64.ln() - 0.5f64.ln());
        // w2 rows (class-major, pen = 3): class 0 row, class 1 row, class 2 row
        let w2 = [
            0.0, big, 0.0, //
            0.0, 0.0, a, //
            0.0, 0.0, b,
        ];
        m.params_mut()[..9].copy_from_slice(&w2);
        let uniform = Sample::new(SampleId(0), PatientId::new("a"), vec![1.0, 0.0, 0.0], ClassLabel(0));
        let one_hot = Sample::new(SampleId(1), PatientId::new("b"), vec![0.0, 1.0, 0.0], ClassLabel(0));
        let mixed = Sample::new(SampleId(2), PatientId::new("c"), vec![0.0, 0.0, 1.0], ClassLabel(0));
        let p = m.predict_proba(&mixed.features).unwrap();
        assert!((p.values()[0] - 0.5).abs() < 1e-12 && (p.values()[1] - 0.3).abs() < 1e-12);
        let cands = [&one_hot, &mixed, &uniform];
        let r = make_ranking(Strategy::Entropy, &m, &cands, 1, 0).unwrap();
        assert_eq!(r.0, ids(&[0, 2, 1]));

        let r = make_ranking(Strategy::Random, &m, &cands, 3, 5).unwrap();
        let mut sorted = r.0.clone();
        sorted.sort();
        assert_eq!(sorted, ids(&[0, 1, 2]));

        assert_eq!(make_ranking(Strategy::Margin, &m, &cands, 0, 0).unwrap().len(), 3);
        assert!(make_ranking(Strategy::Badge, &m, &cands, 4, 0).is_err());
    }
}
