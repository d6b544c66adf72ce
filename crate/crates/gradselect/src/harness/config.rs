//! Experiment configuration: a versioned TOML file with defaults for every
//! field and rejection of unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selector::Strategy;
use crate::simkit::{
    CorpusSpec, ModelSpec, OptimizerSpec, PoolSchedule, ProjectionConfig, RunConfig,
    SelectionSettings,
};

pub const CONFIG_VERSION: u32 = 1;

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_eval_interval() -> usize {
    20
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Strategy sweep plus the knobs shared by every strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    /// Strategies to run; unknown names are rejected at parse time.
    pub names: Vec<String>,
    pub lambda_rel: f64,
    pub precondition_residual_updates: bool,
    pub moment_update_source: crate::simkit::MomentSource,
    pub fixed_val_set: bool,
    pub precondition_warmup_steps: u64,
    pub normalize_preconditioner: bool,
    pub preconditioner_damping: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        let s = SelectionSettings::default();
        StrategyConfig {
            names: vec!["two_stage".to_string()],
            lambda_rel: s.lambda_rel,
            precondition_residual_updates: s.precondition_residual_updates,
            moment_update_source: s.moment_source,
            fixed_val_set: s.fixed_val_set,
            precondition_warmup_steps: s.precondition_warmup_steps,
            normalize_preconditioner: s.normalize_preconditioner,
            preconditioner_damping: s.preconditioner_damping,
        }
    }
}

/// Everything one experiment needs: corpus, model, optimizer, projection,
/// pool schedule, strategy sweep, seeds and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seeds: Vec<u64>,
    pub eval_interval: usize,
    pub output_dir: PathBuf,
    /// Optional loss threshold for steps_to_threshold reporting.
    pub loss_threshold: Option<f64>,
    /// Fix the corpus across seeds (training-seed ensembles on one dataset).
    pub fixed_corpus_seed: Option<u64>,
    /// Fix the model init across seeds (isolates sampling-driven variance).
    pub fixed_model_seed: Option<u64>,
    pub corpus: CorpusSpec,
    pub model: ModelSpec,
    pub optimizer: OptimizerSpec,
    pub projection: ProjectionConfig,
    pub pool: PoolSchedule,
    pub strategy: StrategyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: default_version(),
            seeds: default_seeds(),
            eval_interval: default_eval_interval(),
            output_dir: default_output_dir(),
            loss_threshold: None,
            fixed_corpus_seed: None,
            fixed_model_seed: None,
            corpus: CorpusSpec::default(),
            model: ModelSpec::default(),
            optimizer: OptimizerSpec::default(),
            projection: ProjectionConfig::default(),
            pool: PoolSchedule::default(),
            strategy: StrategyConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialize: {e}")))
    }

    /// Parsed strategy list, rejecting unknown names.
    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        if self.strategy.names.is_empty() {
            return Err(Error::Config("strategy.names must not be empty".into()));
        }
        self.strategy.names.iter().map(|s| s.parse()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.strategies()?;
        self.run_config().validate()
    }

    /// The simulator-facing view of this config.
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            corpus: self.corpus.clone(),
            model: self.model.clone(),
            optimizer: self.optimizer,
            projection: self.projection,
            pool: self.pool,
            selection: SelectionSettings {
                lambda_rel: self.strategy.lambda_rel,
                precondition_residual_updates: self.strategy.precondition_residual_updates,
                moment_source: self.strategy.moment_update_source,
                fixed_val_set: self.strategy.fixed_val_set,
                precondition_warmup_steps: self.strategy.precondition_warmup_steps,
                normalize_preconditioner: self.strategy.normalize_preconditioner,
                preconditioner_damping: self.strategy.preconditioner_damping,
            },
            eval_interval: self.eval_interval,
            fixed_corpus_seed: self.fixed_corpus_seed,
            fixed_model_seed: self.fixed_model_seed,
        }
    }
}
