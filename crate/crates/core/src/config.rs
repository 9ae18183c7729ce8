//! The run configuration: one flat TOML document shared by every command.
//!
//! Unknown keys are rejected. Any key can be overridden from the command line
//! with `--set key=value` (the value is parsed as TOML, so `--set steps=10` and
//! `--set optimizer="adam"` both work; bare words are taken as strings).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::decoder::BudgetConfig;
use crate::error::{Error, Result};
use crate::grpo::TrainConfig;
use crate::model::ModelConfig;
use crate::optim::OptimizerKind;
use crate::taskgen::{CorpusSpec, DifficultyRange, Split};
use crate::warmstart::WarmstartConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of all randomness; each command derives its streams from it.
    pub seed: u64,

    pub modulus: u64,
    pub difficulty_min: usize,
    pub difficulty_max: usize,
    pub train_count: usize,
    pub validation_count: usize,
    pub test_count: usize,
    /// Fraction of gold scratchpads written in the short `#j value` style.
    pub terse_fraction: f64,

    pub context_length: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub embed_dim: usize,
    pub mlp_dim: usize,

    pub warmstart_optimizer: OptimizerKind,
    pub warmstart_learning_rate: f64,
    pub warmstart_final_lr_fraction: f64,
    pub warmstart_batch_size: usize,
    pub warmstart_min_steps: usize,
    pub warmstart_max_steps: usize,
    pub warmstart_check_every: usize,
    pub compliance_threshold: f64,
    pub compliance_problems: usize,
    pub compliance_thinking_budget: usize,
    pub compliance_solution_budget: usize,

    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub group_size: usize,
    pub batch_problems: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub rollout_temperature: f64,
    pub variance_epsilon: f64,
    pub optimizer: OptimizerKind,
    pub length_normalize: bool,
    pub validation_every: usize,
    pub validation_problems: usize,
    pub validation_samples: usize,
    pub init_checkpoint: Option<PathBuf>,

    pub eval_temperature: f64,
    pub eval_samples: usize,
    /// Evaluate on the first `eval_problems` test problems; 0 means all.
    pub eval_problems: usize,
    pub sweep_thinking_budgets: Vec<usize>,
    pub sweep_solution_budget: usize,
    /// Add a row at the largest thinking budget the context allows.
    pub sweep_reference: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let ws = WarmstartConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            modulus: 10,
            difficulty_min: 2,
            difficulty_max: 10,
            train_count: 4000,
            validation_count: 256,
            test_count: 300,
            terse_fraction: 0.5,
            context_length: model.context_length,
            num_layers: model.num_layers,
            num_heads: model.num_heads,
            embed_dim: model.embed_dim,
            mlp_dim: model.mlp_dim,
            warmstart_optimizer: ws.optimizer,
            warmstart_learning_rate: ws.learning_rate,
            warmstart_final_lr_fraction: ws.final_lr_fraction,
            warmstart_batch_size: ws.batch_size,
            warmstart_min_steps: ws.min_steps,
            warmstart_max_steps: ws.max_steps,
            warmstart_check_every: ws.check_every,
            compliance_threshold: ws.compliance_threshold,
            compliance_problems: ws.compliance_problems,
            compliance_thinking_budget: ws.compliance_budget.thinking,
            compliance_solution_budget: ws.compliance_budget.solution,
            thinking_budget: train.thinking_budget,
            solution_budget: train.solution_budget,
            group_size: train.group_size,
            batch_problems: train.batch_problems,
            learning_rate: train.learning_rate,
            steps: train.steps,
            rollout_temperature: train.rollout_temperature,
            variance_epsilon: train.variance_epsilon,
            optimizer: train.optimizer,
            length_normalize: train.length_normalize,
            validation_every: train.validation_every,
            validation_problems: train.validation_problems,
            validation_samples: train.validation_samples,
            init_checkpoint: None,
            eval_temperature: crate::eval::DEFAULT_EVAL_TEMPERATURE,
            eval_samples: 4,
            eval_problems: 0,
            sweep_thinking_budgets: vec![4, 6, 8, 10, 12, 16, 20, 24, 32],
            sweep_solution_budget: 2,
            sweep_reference: false,
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // parse as a TOML value via a one-key document
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl RunConfig {
    /// Reads a TOML config, or the `config` object of a run manifest (`.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            let config = manifest
                .get_mut("config")
                .map(serde_json::Value::take)
                .ok_or_else(|| Error::InvalidConfig(format!("{} has no config object", path.display())))?;
            return serde_json::from_value(config).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())));
        }
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Applies `key=value` overrides.
    pub fn with_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut table = toml::Table::try_from(&self).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("override {item:?} is not key=value")))?;
            let key = key.trim().replace('-', "_");
            table.insert(key, parse_value(raw.trim()));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn corpus_spec(&self, split: Split) -> CorpusSpec {
        let count = match split {
            Split::Train => self.train_count,
            Split::Validation => self.validation_count,
            Split::Test => self.test_count,
        };
        CorpusSpec {
            seed: self.seed,
            count,
            difficulty: DifficultyRange { min: self.difficulty_min, max: self.difficulty_max },
            modulus: self.modulus,
            split,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: crate::vocab::VOCAB_SIZE,
            context_length: self.context_length,
            num_layers: self.num_layers,
            num_heads: self.num_heads,
            embed_dim: self.embed_dim,
            mlp_dim: self.mlp_dim,
            seed: self.seed,
        }
    }

    pub fn warmstart_config(&self) -> WarmstartConfig {
        WarmstartConfig {
            seed: self.seed,
            optimizer: self.warmstart_optimizer,
            learning_rate: self.warmstart_learning_rate,
            final_lr_fraction: self.warmstart_final_lr_fraction,
            batch_size: self.warmstart_batch_size,
            min_steps: self.warmstart_min_steps,
            max_steps: self.warmstart_max_steps,
            check_every: self.warmstart_check_every,
            compliance_threshold: self.compliance_threshold,
            compliance_problems: self.compliance_problems,
            compliance_budget: BudgetConfig::new(self.compliance_thinking_budget, self.compliance_solution_budget),
            temperature: self.eval_temperature,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            thinking_budget: self.thinking_budget,
            solution_budget: self.solution_budget,
            group_size: self.group_size,
            batch_problems: self.batch_problems,
            learning_rate: self.learning_rate,
            steps: self.steps,
            rollout_temperature: self.rollout_temperature,
            seed: self.seed,
            variance_epsilon: self.variance_epsilon,
            optimizer: self.optimizer,
            length_normalize: self.length_normalize,
            validation_every: self.validation_every,
            validation_problems: self.validation_problems,
            validation_samples: self.validation_samples,
            eval_temperature: self.eval_temperature,
            init_checkpoint: self.init_checkpoint.clone(),
        }
    }

    pub fn sweep_budgets(&self) -> Vec<BudgetConfig> {
        self.sweep_thinking_budgets
            .iter()
            .map(|&t| BudgetConfig::new(t, self.sweep_solution_budget))
            .collect()
    }
}
