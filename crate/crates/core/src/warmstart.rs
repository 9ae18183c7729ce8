//! Supervised warm start on gold scratchpads, run until the model reliably
//! follows the `<think> ... </think> ANS <answer> <eos>` protocol.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::decoder::{prompt_template, BudgetConfig, Strategy, Trajectory};
use crate::error::{Error, Result};
use crate::eval::pass_at_1;
use crate::model::{loss_and_gradients, Parameters, SequenceExample};
use crate::optim::{Optimizer, OptimizerKind};
use crate::rng::{self, Domain};
use crate::taskgen::{CorpusRecord, Problem};
use crate::vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmstartConfig {
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// The learning rate follows a cosine from `learning_rate` down to
    /// `learning_rate * final_lr_fraction` over `min_steps`, then stays there.
    pub final_lr_fraction: f64,
    pub batch_size: usize,
    /// Always train at least this many steps before stopping on compliance.
    pub min_steps: usize,
    pub max_steps: usize,
    /// Compliance is measured every `check_every` steps (and at the end).
    pub check_every: usize,
    pub compliance_threshold: f64,
    pub compliance_problems: usize,
    pub compliance_budget: BudgetConfig,
    pub temperature: f64,
}

impl Default for WarmstartConfig {
    fn default() -> Self {
        WarmstartConfig {
            seed: 0,
            optimizer: OptimizerKind::Adam,
            learning_rate: 5e-3,
            final_lr_fraction: 0.05,
            batch_size: 16,
            min_steps: 5000,
            max_steps: 8000,
            check_every: 250,
            compliance_threshold: 0.95,
            compliance_problems: 64,
            compliance_budget: BudgetConfig::new(128, 32),
            temperature: crate::eval::DEFAULT_EVAL_TEMPERATURE,
        }
    }
}

impl WarmstartConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("warmstart learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return bad("final_lr_fraction must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.check_every == 0 || self.compliance_problems == 0 {
            return bad("warmstart batch_size, check_every and compliance_problems must be positive");
        }
        if self.min_steps > self.max_steps {
            return bad("warmstart min_steps exceeds max_steps");
        }
        if !(0.0..=1.0).contains(&self.compliance_threshold) {
            return bad("compliance_threshold must lie in [0, 1]");
        }
        Ok(())
    }
}

impl WarmstartConfig {
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        let horizon = if self.min_steps > 0 { self.min_steps } else { self.max_steps };
        let progress = (step as f64 / horizon.max(1) as f64).min(1.0);
        let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
        self.learning_rate * (self.final_lr_fraction + (1.0 - self.final_lr_fraction) * cosine)
    }
}

/// The model emitted `</think>` itself and then opened its answer with `ANS`.
pub fn is_compliant(t: &Trajectory) -> bool {
    !t.forced_think_end
        && t.think_tokens.last() == Some(&vocab::THINK_CLOSE)
        && t.solution_tokens.first() == Some(&vocab::ANSWER)
}

pub fn compliance_rate(params: &Parameters, problems: &[Problem], config: &WarmstartConfig) -> Result<f64> {
    let e = pass_at_1(
        params,
        problems,
        Strategy::Separate,
        config.compliance_budget,
        1,
        config.temperature,
        config.seed,
    )?;
    let ok = e.trajectories.iter().filter(|t| is_compliant(t)).count();
    Ok(ok as f64 / e.trajectories.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmstartRecord {
    pub step: usize,
    pub loss: f64,
    pub compliance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmstartLog {
    pub records: Vec<WarmstartRecord>,
    pub final_compliance: Option<f64>,
    /// Compliance reached the threshold after at least `min_steps` steps.
    pub converged: bool,
}

impl WarmstartLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tloss\tcompliance\n");
        for r in &self.records {
            let c = r.compliance.map(|c| format!("{c:.4}")).unwrap_or_default();
            out.push_str(&format!("{}\t{:.6}\t{c}\n", r.step, r.loss));
        }
        out
    }
}

fn gold_examples(records: &[CorpusRecord]) -> Result<Vec<SequenceExample>> {
    records
        .iter()
        .map(|r| {
            let gold = r
                .gold
                .clone()
                .ok_or_else(|| Error::MissingData(format!("record {} has no gold completion", r.id)))?;
            let mask = vec![true; gold.len()];
            Ok(SequenceExample::uniform(prompt_template(&r.prompt), gold, mask, 1.0))
        })
        .collect()
}

/// Trains `params` in place on gold completions. `max_steps = 0` leaves them
/// untouched (and counts as converged). Otherwise trains until compliance on
/// `checks` reaches the threshold or `max_steps` run out.
pub fn warmstart(
    params: &mut Parameters,
    corpus: &[CorpusRecord],
    checks: &[Problem],
    config: &WarmstartConfig,
) -> Result<WarmstartLog> {
    config.validate()?;
    let examples = gold_examples(corpus)?;
    if examples.is_empty() {
        return Err(Error::MissingData("empty warm-start corpus".into()));
    }
    let mut log = WarmstartLog { records: Vec::new(), final_compliance: None, converged: false };
    if config.max_steps == 0 {
        log.converged = true;
        return Ok(log);
    }
    let checks = &checks[..checks.len().min(config.compliance_problems)];
    if checks.is_empty() {
        return Err(Error::MissingData("no problems to measure compliance on".into()));
    }
    let mut optimizer = Optimizer::new(config.optimizer, params.len());
    let mut rng = rng::stream(config.seed, Domain::Supervised, &[]);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    for step in 0..config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(examples[order[cursor]].clone());
            cursor += 1;
        }
        let (loss, grads) = loss_and_gradients(params, &batch)?;
        optimizer.step(params, &grads, config.learning_rate_at(step))?;
        let done = step + 1;
        let compliance = if done % config.check_every == 0 || done == config.max_steps {
            Some(compliance_rate(params, checks, config)?)
        } else {
            None
        };
        log.records.push(WarmstartRecord { step, loss, compliance });
        if let Some(c) = compliance {
            log.final_compliance = Some(c);
            if done >= config.min_steps && c >= config.compliance_threshold {
                log.converged = true;
                return Ok(log);
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::taskgen::{generate_corpus, gold_completion, CorpusSpec, DifficultyRange, ScratchStyle, Split};

    fn corpus() -> Vec<Problem> {
        generate_corpus(&CorpusSpec {
            seed: 0,
            count: 8,
            difficulty: DifficultyRange { min: 2, max: 3 },
            modulus: 10,
            split: Split::Train,
        })
        .unwrap()
    }

    fn tiny() -> Parameters {
        init_params(&ModelConfig { context_length: 64, embed_dim: 8, mlp_dim: 16, num_heads: 2, ..Default::default() })
            .unwrap()
    }

    fn config() -> WarmstartConfig {
        WarmstartConfig {
            min_steps: 4,
            max_steps: 6,
            check_every: 2,
            compliance_problems: 4,
            compliance_budget: BudgetConfig::new(30, 4),
            ..Default::default()
        }
    }

    #[test]
    fn schedule_decays_to_floor() {
        let c = WarmstartConfig { learning_rate: 1.0, final_lr_fraction: 0.1, min_steps: 10, ..Default::default() };
        assert_eq!(c.learning_rate_at(0), 1.0);
        assert!((c.learning_rate_at(5) - 0.55).abs() < 1e-12);
        assert!((c.learning_rate_at(10) - 0.1).abs() < 1e-12);
        assert!((c.learning_rate_at(500) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_steps_keeps_initialization() {
        let ps = corpus();
        let records: Vec<_> = ps.iter().map(|p| CorpusRecord::new(p, Some(gold_completion(p, ScratchStyle::Terse)))).collect();
        let mut params = tiny();
        let init = params.clone();
        let log = warmstart(&mut params, &records, &ps, &WarmstartConfig { min_steps: 0, max_steps: 0, ..config() }).unwrap();
        assert_eq!(params, init);
        assert!(log.converged && log.records.is_empty());
    }

    #[test]
    fn missing_gold_is_missing_data() {
        let ps = corpus();
        let records: Vec<_> = ps.iter().map(|p| CorpusRecord::new(p, None)).collect();
        assert!(matches!(warmstart(&mut tiny(), &records, &ps, &config()), Err(Error::MissingData(_))));
    }

    #[test]
    fn short_run_logs_every_step_and_checks_compliance() {
        let ps = corpus();
        let records: Vec<_> = ps.iter().map(|p| CorpusRecord::new(p, Some(gold_completion(p, ScratchStyle::Verbose)))).collect();
        let mut params = tiny();
        let log = warmstart(&mut params, &records, &ps, &WarmstartConfig { compliance_threshold: 1.0, ..config() }).unwrap();
        assert!(params.all_finite());
        assert_eq!(log.records.len(), 6);
        assert_eq!(log.records.iter().filter(|r| r.compliance.is_some()).count(), 3);
        assert!(!log.converged);
        assert_eq!(log.to_tsv().lines().count(), 7);
    }
}
