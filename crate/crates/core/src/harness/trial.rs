use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitMode, QueryStrategy};
use super::metrics::LearningCurve;
use crate::acquisition::{gradient_embeddings, make_ranking, select_badge, Strategy};
use crate::dataset::{DatasetSplit, LabeledSet, PatientId, Sample};
use crate::decal::{
    constrain_unique_patients, decal_initialize, random_initialize, select_badge_unique_patients,
    QueryBatch,
};
use crate::learner::{evaluate, train_round, Model, TrainingData};
use crate::seed::{self, stream};
use crate::{Error, Result};

/// One evaluation point of one trial. Round 0 is right after initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub trial_seed: u64,
    pub round: usize,
    pub train_size: usize,
    pub test_accuracy: f64,
    pub epochs_used: usize,
    /// Relaxed slots in the batch that brought the labeled set to `train_size`.
    pub relaxed_count: usize,
}

/// Records plus every batch the trial labeled, initialization first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub records: Vec<RoundRecord>,
    pub batches: Vec<QueryBatch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub strategy: QueryStrategy,
    pub init_mode: InitMode,
    /// Per-trial records in trial-seed order.
    pub trials: Vec<Vec<RoundRecord>>,
    pub curve: LearningCurve,
}

impl ExperimentResult {
    pub fn from_trials(strategy: QueryStrategy, init_mode: InitMode, trials: Vec<Vec<RoundRecord>>) -> Result<Self> {
        let curve = LearningCurve::from_trials(&trials)?;
        Ok(ExperimentResult {
            strategy,
            init_mode,
            trials,
            curve,
        })
    }

    pub fn records(&self) -> impl Iterator<Item = &RoundRecord> + '_ {
        self.trials.iter().flatten()
    }
}

/// Labeled set and remaining pool of one trial.
struct TrialState<'a> {
    split: &'a DatasetSplit,
    labeled: LabeledSet,
    remaining: Vec<bool>,
    remaining_count: usize,
}

impl<'a> TrialState<'a> {
    fn new(split: &'a DatasetSplit) -> Self {
        TrialState {
            split,
            labeled: LabeledSet::new(),
            remaining: vec![true; split.pool().len()],
            remaining_count: split.pool().len(),
        }
    }

    fn candidates(&self) -> Vec<&'a Sample> {
        self.split
            .pool()
            .iter()
            .zip(&self.remaining)
            .filter_map(|(s, &r)| r.then_some(s))
            .collect()
    }

    /// Reveals and appends a batch after checking it against the pool.
    fn absorb(&mut self, batch: &QueryBatch, expected: usize, unique_patients: bool) -> Result<()> {
        if batch.len() != expected {
            return Err(Error::Runtime(format!(
                "batch has {} samples, expected {expected}",
                batch.len()
            )));
        }
        let mut ids = HashSet::with_capacity(batch.len());
        let mut patients: HashSet<&PatientId> = HashSet::with_capacity(batch.len());
        for &id in &batch.members {
            let pos = self
                .split
                .pool_position(id)
                .ok_or_else(|| Error::Runtime(format!("batch member {id} is not in the pool")))?;
            if !self.remaining[pos] || !ids.insert(id) {
                return Err(Error::Runtime(format!("sample {id} queried twice")));
            }
            patients.insert(&self.split.pool()[pos].patient);
        }
        if unique_patients && batch.relaxed_count == 0 && patients.len() != batch.len() {
            return Err(Error::Runtime(format!(
                "unrelaxed batch of {} samples covers only {} patients",
                batch.len(),
                patients.len()
            )));
        }
        for &id in &batch.members {
            let pos = self.split.pool_position(id).expect("checked above");
            self.labeled.reveal_and_push(self.split, id)?;
            self.remaining[pos] = false;
            self.remaining_count -= 1;
        }
        Ok(())
    }

    fn check_bookkeeping(&self, expected: usize) -> Result<()> {
        let pool = self.split.pool().len();
        if self.labeled.len() != expected || self.remaining_count != pool - expected {
            return Err(Error::Runtime(format!(
                "labeled {} / remaining {} do not match expected {expected} of {pool}",
                self.labeled.len(),
                self.remaining_count
            )));
        }
        for (id, _) in self.labeled.members() {
            let pos = self.split.pool_position(*id).expect("labeled ids come from the pool");
            if self.remaining[pos] {
                return Err(Error::Runtime(format!("sample {id} is both labeled and remaining")));
            }
        }
        Ok(())
    }

    fn training_data(&self) -> TrainingData<'a> {
        let mut data = TrainingData::default();
        for &(id, label) in self.labeled.members() {
            let s = self.split.pool_sample(id).expect("labeled ids come from the pool");
            data.push(&s.features, label);
        }
        data
    }
}

fn next_batch(
    strategy: QueryStrategy,
    model: &Model,
    split: &DatasetSplit,
    candidates: &[&Sample],
    k: usize,
    seed: u64,
) -> Result<QueryBatch> {
    let batch = match (strategy.base, strategy.unique_patients) {
        (Strategy::Badge, false) => QueryBatch {
            members: select_badge(&gradient_embeddings(model, candidates)?, k, seed)?.into_inner(),
            relaxed_count: 0,
        },
        (Strategy::Badge, true) => {
            select_badge_unique_patients(&gradient_embeddings(model, candidates)?, split, k, seed)?
        }
        (base, false) => {
            let mut ranking = make_ranking(base, model, candidates, k, seed)?.into_inner();
            ranking.truncate(k);
            QueryBatch {
                members: ranking,
                relaxed_count: 0,
            }
        }
        (base, true) => {
            // the constraint consumes a full ranking, so random is a full permutation
            let depth = if base == Strategy::Random { candidates.len() } else { k };
            let ranking = make_ranking(base, model, candidates, depth, seed)?;
            constrain_unique_patients(&ranking, split, k)?
        }
    };
    Ok(batch)
}

/// Builds the dataset and runs one trial.
pub fn run_trial(cfg: &ExperimentConfig, trial_seed: u64) -> Result<Vec<RoundRecord>> {
    let split = cfg.dataset.build(None)?;
    Ok(run_trial_on(&split, cfg, trial_seed)?.records)
}

/// Initialize, then `rounds + 1` times: reset the model, train, evaluate on
/// the test split, and (except after the last round) query one batch.
pub fn run_trial_on(split: &DatasetSplit, cfg: &ExperimentConfig, trial_seed: u64) -> Result<TrialOutcome> {
    cfg.validate()?;
    cfg.check_budget(split.pool().len())?;
    let e = &cfg.experiment;

    let init_seed = seed::derive(trial_seed, &[stream::INIT]);
    let init = match e.init_mode {
        InitMode::Random => random_initialize(split.pool(), e.init_size, init_seed)?,
        InitMode::Decal => decal_initialize(split.pool(), e.init_size, init_seed)?,
    };
    let mut state = TrialState::new(split);
    state.absorb(&init, e.init_size, e.init_mode == InitMode::Decal)?;
    let mut relaxed_count = init.relaxed_count;
    let mut batches = vec![init];
    let mut records = Vec::with_capacity(e.rounds + 1);

    for round in 0..=e.rounds {
        let train_size = e.init_size + round * e.batch_size;
        state.check_bookkeeping(train_size)?;

        let round_key = round as u64;
        let mut model = Model::init(
            &cfg.learner,
            split.feature_dim(),
            split.num_classes(),
            seed::derive(trial_seed, &[stream::MODEL, round_key]),
        );
        let report = train_round(
            &mut model,
            &state.training_data(),
            &cfg.learner,
            seed::derive(trial_seed, &[stream::TRAIN, round_key]),
        )?;
        let test_accuracy = evaluate(&model, split.test_examples())?;
        records.push(RoundRecord {
            trial_seed,
            round,
            train_size,
            test_accuracy,
            epochs_used: report.epochs_used,
            relaxed_count,
        });

        if round < e.rounds {
            let candidates = state.candidates();
            let batch = next_batch(
                e.strategy,
                &model,
                split,
                &candidates,
                e.batch_size,
                seed::derive(trial_seed, &[stream::QUERY, round_key]),
            )?;
            state.absorb(&batch, e.batch_size, e.strategy.unique_patients)?;
            relaxed_count = batch.relaxed_count;
            batches.push(batch);
        }
    }
    Ok(TrialOutcome { records, batches })
}

/// Trial seeds `base_seed .. base_seed + trials`.
pub fn trial_seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    let base = cfg.experiment.base_seed;
    (0..cfg.experiment.trials as u64).map(|t| base + t).collect()
}

/// Builds the dataset and runs every trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let split = cfg.dataset.build(None)?;
    run_experiment_on(&split, cfg)
}

/// Runs all trials on up to `experiment.workers` threads. Output is ordered by
/// trial seed regardless of scheduling.
pub fn run_experiment_on(split: &DatasetSplit, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    cfg.check_budget(split.pool().len())?;
    let seeds = trial_seeds(cfg);
    let trials: Vec<Vec<RoundRecord>> = if cfg.experiment.workers > 1 && seeds.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.experiment.workers)
            .build()
            .map_err(|e| Error::Runtime(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            seeds
                .par_iter()
                .map(|&s| run_trial_on(split, cfg, s).map(|o| o.records))
                .collect::<Result<_>>()
        })?
    } else {
        seeds
            .iter()
            .map(|&s| run_trial_on(split, cfg, s).map(|o| o.records))
            .collect::<Result<_>>()?
    };
    ExperimentResult::from_trials(cfg.experiment.strategy, cfg.experiment.init_mode, trials)
}
