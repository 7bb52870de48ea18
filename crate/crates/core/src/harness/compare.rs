use serde::Serialize;

use super::config::{ExperimentConfig, InitMode, QueryStrategy};
use super::metrics::percent_change;
use super::trial::{run_experiment_on, ExperimentResult};
use crate::dataset::DatasetSplit;
use crate::{Error, Result};

/// Mean ± std of one experiment at one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitSummary {
    pub init_mode: InitMode,
    pub train_size: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

/// One row of an initialization comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitComparison {
    pub strategy: QueryStrategy,
    pub round: usize,
    pub baseline: InitSummary,
    pub treatment: InitSummary,
    /// Percent change of the treatment mean over the baseline mean.
    pub percent_change: f64,
}

fn summary_at(result: &ExperimentResult, round: usize) -> Result<InitSummary> {
    let p = result
        .curve
        .point(round)
        .ok_or_else(|| Error::usage(format!("experiment has no round {round}")))?;
    Ok(InitSummary {
        init_mode: result.init_mode,
        train_size: p.train_size,
        mean: p.mean,
        std: p.std,
        stderr: p.stderr,
    })
}

/// Compares two finished experiments at `round`. The random-initialized one
/// is the baseline when exactly one of them is; otherwise `a` is.
pub fn compare_results(a: &ExperimentResult, b: &ExperimentResult, round: usize) -> Result<InitComparison> {
    if a.strategy != b.strategy {
        return Err(Error::usage(format!(
            "cannot compare strategies {} and {}",
            a.strategy, b.strategy
        )));
    }
    let (baseline, treatment) = match (a.init_mode, b.init_mode) {
        (InitMode::Decal, InitMode::Random) => (b, a),
        _ => (a, b),
    };
    let baseline = summary_at(baseline, round)?;
    let treatment = summary_at(treatment, round)?;
    Ok(InitComparison {
        strategy: a.strategy,
        round,
        percent_change: percent_change(treatment.mean, baseline.mean)?,
        baseline,
        treatment,
    })
}

/// Errors unless the two configs are identical apart from `init_mode` and
/// the output directory.
pub fn check_comparable(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<()> {
    let mut b_norm = b.clone();
    b_norm.experiment.init_mode = a.experiment.init_mode;
    b_norm.experiment.output_dir = a.experiment.output_dir.clone();
    if &b_norm != a {
        return Err(Error::usage(
            "configs to compare must be identical except for experiment.init_mode",
        ));
    }
    Ok(())
}

/// Runs both experiments on one dataset and compares them at `round`.
pub fn compare_initializations(
    split: &DatasetSplit,
    a: &ExperimentConfig,
    b: &ExperimentConfig,
    round: usize,
) -> Result<(InitComparison, ExperimentResult, ExperimentResult)> {
    check_comparable(a, b)?;
    if round > a.experiment.rounds {
        return Err(Error::usage(format!(
            "round {round} is past the last round {}",
            a.experiment.rounds
        )));
    }
    let ra = run_experiment_on(split, a)?;
    let rb = run_experiment_on(split, b)?;
    let cmp = compare_results(&ra, &rb, round)?;
    Ok((cmp, ra, rb))
}
