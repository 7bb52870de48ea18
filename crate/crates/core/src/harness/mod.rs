//! Experiment orchestration: configs, the per-trial loop, aggregation,
//! initialization comparisons and report files.

mod compare;
mod config;
mod metrics;
mod report;
mod trial;

pub use compare::{check_comparable, compare_initializations, compare_results, InitComparison, InitSummary};
pub use config::{DatasetConfig, ExperimentConfig, ExperimentSection, InitMode, Normalization, QueryStrategy};
pub use metrics::{
    chance_level, difference_in_standard_errors, earliest_round_above_chance, headline_gain, mean_std,
    percent_change, CurvePoint, HeadlineGain, LearningCurve,
};
pub use report::{
    emit_comparison, emit_report, learning_curve_svg, read_raw_csv, regenerate_report, write_aggregate_csv,
    write_comparison_csv, write_raw_csv, ReportFiles, AGGREGATE_CSV, COMPARISON_CSV, CURVES_SVG, RAW_CSV,
};
pub use trial::{
    run_experiment, run_experiment_on, run_trial, run_trial_on, trial_seeds, ExperimentResult, RoundRecord,
    TrialOutcome,
};
