//! Aggregate statistics over trials and the comparison metrics reported for
//! initialization studies.

use serde::{Deserialize, Serialize};

use super::trial::RoundRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: usize,
    pub train_size: usize,
    pub mean: f64,
    /// Sample standard deviation (divisor `trials - 1`); 0 for a single trial.
    pub std: f64,
    /// `std / sqrt(trials)`.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub trials: usize,
    pub points: Vec<CurvePoint>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl LearningCurve {
    /// Aggregates per-round accuracies across trials. All trials must report
    /// the same rounds with the same train sizes.
    pub fn from_trials(trials: &[Vec<RoundRecord>]) -> Result<Self> {
        let first = trials
            .first()
            .ok_or_else(|| Error::usage("cannot aggregate zero trials"))?;
        for t in trials {
            if t.len() != first.len() {
                return Err(Error::usage("trials report different numbers of rounds"));
            }
        }
        let n = trials.len();
        let mut points = Vec::with_capacity(first.len());
        for (r, head) in first.iter().enumerate() {
            let mut accs = Vec::with_capacity(n);
            for t in trials {
                let rec = &t[r];
                if rec.round != head.round || rec.train_size != head.train_size {
                    return Err(Error::usage(format!(
                        "trial {} round {} does not line up with trial {}",
                        rec.trial_seed, rec.round, head.trial_seed
                    )));
                }
                accs.push(rec.test_accuracy);
            }
            let (mean, std) = mean_std(&accs);
            points.push(CurvePoint {
                round: head.round,
                train_size: head.train_size,
                mean,
                std,
                stderr: std / (n as f64).sqrt(),
            });
        }
        Ok(LearningCurve { trials: n, points })
    }

    pub fn point(&self, round: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.round == round)
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }
}

/// First round whose mean accuracy is strictly above chance, `1 / C`.
pub fn earliest_round_above_chance(curve: &LearningCurve, num_classes: usize) -> Option<usize> {
    let chance = chance_level(num_classes);
    curve.points.iter().find(|p| p.mean > chance).map(|p| p.round)
}

pub fn chance_level(num_classes: usize) -> f64 {
    1.0 / num_classes as f64
}

/// `(treatment - baseline) / baseline * 100`.
pub fn percent_change(treatment: f64, baseline: f64) -> Result<f64> {
    if baseline.is_nan() || baseline <= 0.0 {
        return Err(Error::usage(format!("baseline must be positive, got {baseline}")));
    }
    Ok((treatment - baseline) / baseline * 100.0)
}

/// `|a - b|` in units of the standard error of the difference,
/// `sqrt(se_a^2 + se_b^2)`. Infinite when both errors are zero and the means
/// differ, zero when they agree exactly.
pub fn difference_in_standard_errors(a: &CurvePoint, b: &CurvePoint) -> f64 {
    let diff = (a.mean - b.mean).abs();
    let se = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// Two ways of summarising a treatment's gain over several baselines (one
/// per architecture, say). Both are reported since neither is canonical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadlineGain {
    /// Mean of the per-pair percent changes.
    pub mean_of_relative_pct: f64,
    /// Percent change of the mean treatment over the mean baseline.
    pub relative_of_means_pct: f64,
}

pub fn headline_gain(pairs: &[(f64, f64)]) -> Result<HeadlineGain> {
    if pairs.is_empty() {
        return Err(Error::usage("headline gain needs at least one pair"));
    }
    let n = pairs.len() as f64;
    let mut rel = 0.0;
    for &(t, b) in pairs {
        rel += percent_change(t, b)?;
    }
    let mean_t = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    Ok(HeadlineGain {
        mean_of_relative_pct: rel / n,
        relative_of_means_pct: percent_change(mean_t, mean_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seed: u64, round: usize, acc: f64) -> RoundRecord {
        RoundRecord {
            trial_seed: seed,
            round,
            train_size: 10 + 5 * round,
            test_accuracy: acc,
            epochs_used: 1,
            relaxed_count: 0,
        }
    }

    fn curve_of(means: &[f64]) -> LearningCurve {
        let t: Vec<RoundRecord> = means.iter().enumerate().map(|(r, &m)| rec(0, r, m)).collect();
        LearningCurve::from_trials(&[t]).unwrap()
    }

    #[test]
    fn two_point_statistics() {
        let c = LearningCurve::from_trials(&[vec![rec(0, 0, 0.5)], vec![rec(1, 0, 0.7)]]).unwrap();
        let p = &c.points[0];
        assert!((p.mean - 0.6).abs() < 1e-15);
        assert!((p.std - 0.141_421_356_237_309_5).abs() < 1e-12);
        assert!((p.stderr - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let c = curve_of(&[0.4, 0.6]);
        assert_eq!(c.means(), vec![0.4, 0.6]);
        assert!(c.points.iter().all(|p| p.std == 0.0 && p.stderr == 0.0));
    }

    #[test]
    fn misaligned_trials_are_rejected() {
        assert!(LearningCurve::from_trials(&[]).is_err());
        assert!(LearningCurve::from_trials(&[vec![rec(0, 0, 0.5)], vec![]]).is_err());
        let mut shifted = rec(1, 0, 0.5);
        shifted.train_size = 99;
        assert!(LearningCurve::from_trials(&[vec![rec(0, 0, 0.5)], vec![shifted]]).is_err());
    }

    #[test]
    fn above_chance() {
        assert_eq!(earliest_round_above_chance(&curve_of(&[0.30, 0.34, 0.60]), 3), Some(1));
        assert_eq!(earliest_round_above_chance(&curve_of(&[0.30, 1.0 / 3.0, 0.2]), 3), None);
        assert!((chance_level(3) - 0.3333).abs() < 1e-4);
    }

    #[test]
    fn percent_changes() {
        assert!((percent_change(64.53, 61.38).unwrap() - 5.131_964_809_384_164).abs() < 1e-9);
        assert_eq!(percent_change(0.42, 0.42).unwrap(), 0.0);
        assert_eq!(percent_change(50.0, 40.0).unwrap(), 25.0);
        assert!(percent_change(1.0, 0.0).is_err());
    }

    #[test]
    fn headline_variants() {
        // three treatment/baseline pairs
        let g = headline_gain(&[(64.53, 61.38), (69.28, 64.4), (80.16, 76.93)]).unwrap();
        assert!((g.mean_of_relative_pct - 5.636_075_561_648_599).abs() < 1e-9);
        assert!((g.relative_of_means_pct - 5.554_733_362_932_268).abs() < 1e-9);
    }

    #[test]
    fn standard_error_distance() {
        let a = CurvePoint { round: 0, train_size: 1, mean: 0.6, std: 0.0, stderr: 0.03 };
        let b = CurvePoint { mean: 0.5, stderr: 0.04, ..a.clone() };
        assert!((difference_in_standard_errors(&a, &b) - 2.0).abs() < 1e-12);
        assert_eq!(difference_in_standard_errors(&a, &a), 0.0);
    }
}
