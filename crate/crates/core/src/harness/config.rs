use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::acquisition::Strategy;
use crate::dataset::{self, CsvSchema, DatasetSplit, SyntheticConfig};
use crate::learner::LearnerConfig;
use crate::{Error, Result};

/// A baseline strategy, optionally under the unique-patient constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QueryStrategy {
    pub base: Strategy,
    pub unique_patients: bool,
}

impl QueryStrategy {
    pub const fn baseline(base: Strategy) -> Self {
        QueryStrategy {
            base,
            unique_patients: false,
        }
    }

    pub const fn decal(base: Strategy) -> Self {
        QueryStrategy {
            base,
            unique_patients: true,
        }
    }

    /// All ten strategy variants, baselines first.
    pub fn all() -> Vec<QueryStrategy> {
        Strategy::ALL
            .into_iter()
            .map(Self::baseline)
            .chain(Strategy::ALL.into_iter().map(Self::decal))
            .collect()
    }
}

impl fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unique_patients {
            write!(f, "decal_{}", self.base)
        } else {
            write!(f, "{}", self.base)
        }
    }
}

impl FromStr for QueryStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("decal_") {
            Some(base) => Ok(QueryStrategy::decal(base.parse()?)),
            None => Ok(QueryStrategy::baseline(s.parse()?)),
        }
    }
}

impl Serialize for QueryStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QueryStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    Random,
    Decal,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InitMode::Random => "random",
            InitMode::Decal => "decal",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(InitMode::Random),
            "decal" => Ok(InitMode::Decal),
            other => Err(Error::config(format!("unknown init mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    pub mu: f64,
    pub sigma: f64,
}

/// Where the data comes from. Exactly one of `csv`, `preset`, `synthetic`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: Option<PathBuf>,
    pub schema: Option<CsvSchema>,
    pub preset: Option<String>,
    pub synthetic: Option<SyntheticConfig>,
    /// Generator seed for `preset` / `synthetic`.
    pub seed: u64,
    pub normalize: Option<Normalization>,
}

impl DatasetConfig {
    pub fn preset(name: &str, seed: u64) -> Self {
        DatasetConfig {
            preset: Some(name.to_string()),
            seed,
            ..Default::default()
        }
    }

    /// Resolves `preset` into its synthetic config, if one is named.
    pub fn synthetic_config(&self) -> Result<Option<SyntheticConfig>> {
        match (&self.preset, &self.synthetic) {
            (Some(name), None) => SyntheticConfig::preset(name).map(Some),
            (None, Some(cfg)) => Ok(Some(cfg.clone())),
            _ => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [self.csv.is_some(), self.preset.is_some(), self.synthetic.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources != 1 {
            return Err(Error::config(
                "dataset needs exactly one of `csv`, `preset`, `synthetic`",
            ));
        }
        if self.schema.is_some() && self.csv.is_none() {
            return Err(Error::config("dataset `schema` only applies to `csv` sources"));
        }
        if let Some(cfg) = self.synthetic_config()? {
            cfg.validate()?;
        }
        if let Some(n) = self.normalize {
            if n.sigma.is_nan() || n.sigma <= 0.0 {
                return Err(Error::config(format!("normalize.sigma must be > 0, got {}", n.sigma)));
            }
        }
        Ok(())
    }

    /// Builds the split. Relative CSV paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<DatasetSplit> {
        self.validate()?;
        let split = if let Some(path) = &self.csv {
            let path = match base_dir {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path.clone(),
            };
            dataset::load_dataset(path, &self.schema.clone().unwrap_or_default())?
        } else {
            let cfg = self.synthetic_config()?.expect("validated synthetic source");
            dataset::generate_synthetic(&cfg, self.seed)?
        };
        match self.normalize {
            Some(Normalization { mu, sigma }) => dataset::normalize_features(split, mu, sigma),
            None => Ok(split),
        }
    }
}

fn default_init_size() -> usize {
    128
}
fn default_batch_size() -> usize {
    128
}
fn default_rounds() -> usize {
    20
}
fn default_trials() -> usize {
    5
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub strategy: QueryStrategy,
    pub init_mode: InitMode,
    #[serde(default = "default_init_size")]
    pub init_size: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Trials run in parallel on up to this many threads.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentSection {
    pub fn new(strategy: QueryStrategy, init_mode: InitMode) -> Self {
        ExperimentSection {
            strategy,
            init_mode,
            init_size: default_init_size(),
            batch_size: default_batch_size(),
            rounds: default_rounds(),
            trials: default_trials(),
            base_seed: 0,
            output_dir: None,
            workers: default_workers(),
        }
    }

    /// Total labels spent by one trial.
    pub fn budget(&self) -> usize {
        self.init_size + self.rounds * self.batch_size
    }
}

/// The full config file: `dataset`, `learner`, `experiment` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the dataset.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.learner.validate()?;
        let e = &self.experiment;
        if e.trials == 0 {
            return Err(Error::config("experiment.trials must be >= 1"));
        }
        if e.init_mode == InitMode::Decal && e.init_size == 0 {
            return Err(Error::config("decal initialization needs init_size >= 1"));
        }
        if e.rounds > 0 && e.batch_size == 0 {
            return Err(Error::config("experiment.batch_size must be >= 1"));
        }
        if e.init_size == 0 {
            return Err(Error::config("experiment.init_size must be >= 1"));
        }
        if e.workers == 0 {
            return Err(Error::config("experiment.workers must be >= 1"));
        }
        Ok(())
    }

    /// Checks the label budget against an actual pool.
    pub fn check_budget(&self, pool_size: usize) -> Result<()> {
        let budget = self.experiment.budget();
        if budget > pool_size {
            return Err(Error::config(format!(
                "init_size + rounds * batch_size = {budget} exceeds the pool of {pool_size} samples"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dataset": {"preset": "skewed", "seed": 3},
        "experiment": {"strategy": "decal_badge", "init_mode": "decal"}
    }"#;

    #[test]
    fn defaults_follow_the_reported_setup() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let e = &cfg.experiment;
        assert_eq!((e.init_size, e.batch_size, e.rounds, e.trials), (128, 128, 20, 5));
        assert_eq!(e.strategy, QueryStrategy::decal(Strategy::Badge));
        assert_eq!(cfg.learner.learning_rate, 1.5e-4);
        assert_eq!(cfg.learner.train_accuracy_target, 0.98);
        assert_eq!(cfg.learner.max_epochs, 500);
        assert_eq!(e.budget(), 2688);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"seed\": 3", "\"seed\": 3, \"colour\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("\"init_mode\"", "\"learning\": 1, \"init_mode\"");
        assert!(ExperimentConfig::from_json(&bad).is_err());
        let bad = MINIMAL.replace("decal_badge", "decal_coreset");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn budget_overflow_is_a_config_error() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert!(cfg.check_budget(2688).is_ok());
        assert!(matches!(cfg.check_budget(2687), Err(Error::Config(_))));
    }

    #[test]
    fn dataset_source_must_be_unique() {
        let both = MINIMAL.replace("\"preset\": \"skewed\"", "\"preset\": \"skewed\", \"csv\": \"x.csv\"");
        assert!(ExperimentConfig::from_json(&both).is_err());
        let none = MINIMAL.replace("\"preset\": \"skewed\", ", "");
        assert!(ExperimentConfig::from_json(&none).is_err());
    }

    #[test]
    fn strategy_strings() {
        let names: Vec<String> = QueryStrategy::all().iter().map(|s| s.to_string()).collect();
        assert_eq!(
            names,
            [
                "random",
                "entropy",
                "margin",
                "least_confidence",
                "badge",
                "decal_random",
                "decal_entropy",
                "decal_margin",
                "decal_least_confidence",
                "decal_badge"
            ]
        );
        for s in QueryStrategy::all() {
            assert_eq!(s.to_string().parse::<QueryStrategy>().unwrap(), s);
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
