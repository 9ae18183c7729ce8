//! Group-relative policy gradient with budget-constrained rollouts: every
//! rollout is decoded with separate budgeting at the fixed training pair `(t*, s*)`.

use std::path::PathBuf;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{decode_separate_budget, BudgetConfig, Strategy, Trajectory};
use crate::error::{Error, Result};
use crate::eval::pass_at_1;
use crate::model::{loss_and_gradients, Parameters, SequenceExample};
use crate::optim::{Optimizer, OptimizerKind};
use crate::policy::Policy;
use crate::rng::{self, Domain, Rng};
use crate::taskgen::{self, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub group_size: usize,
    pub batch_problems: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub rollout_temperature: f64,
    pub seed: u64,
    pub variance_epsilon: f64,
    pub optimizer: OptimizerKind,
    /// Divide each trajectory's advantage by its number of policy-chosen tokens.
    pub length_normalize: bool,
    /// Validate after every `validation_every` steps; 0 disables periodic validation.
    pub validation_every: usize,
    pub validation_problems: usize,
    pub validation_samples: usize,
    pub eval_temperature: f64,
    pub init_checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            thinking_budget: 16,
            solution_budget: 2,
            group_size: 8,
            batch_problems: 16,
            learning_rate: 0.005,
            steps: 150,
            rollout_temperature: 1.0,
            seed: 0,
            variance_epsilon: 1e-8,
            optimizer: OptimizerKind::Sgd,
            length_normalize: false,
            validation_every: 25,
            validation_problems: 128,
            validation_samples: 1,
            eval_temperature: crate::eval::DEFAULT_EVAL_TEMPERATURE,
            init_checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn budget(&self) -> BudgetConfig {
        BudgetConfig::new(self.thinking_budget, self.solution_budget)
    }

    pub fn validate(&self, context_length: usize, longest_prompt: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.thinking_budget == 0 || self.solution_budget == 0 {
            return bad("thinking and solution budgets must be at least 1".into());
        }
        if self.group_size < 2 {
            return bad(format!("group_size {} must be at least 2", self.group_size));
        }
        if self.batch_problems == 0 {
            return bad("batch_problems must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive".into());
        }
        if !(self.rollout_temperature > 0.0) || !(self.eval_temperature > 0.0) {
            return bad("temperatures must be positive".into());
        }
        if !(self.variance_epsilon >= 0.0) {
            return bad("variance_epsilon must be non-negative".into());
        }
        if self.validation_every > 0 && (self.validation_problems == 0 || self.validation_samples == 0) {
            return bad("validation needs at least one problem and one sample".into());
        }
        let needed = longest_prompt + 1 + self.budget().total();
        if needed > context_length {
            return bad(format!(
                "prompt ({longest_prompt}) + <think> + budget {} needs {needed} positions, context is {context_length}",
                self.budget()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub problem_id: u64,
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    /// Empty until [`RolloutGroup::assign_advantages`] runs.
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn assign_advantages(&mut self, variance_epsilon: f64) -> Result<()> {
        self.advantages = compute_advantages(&self.rewards, variance_epsilon)?;
        Ok(())
    }
}

/// `A_i = (r_i - mean) / sqrt(var + eps)` with the population variance; all zero
/// when the rewards are all equal. Rewards are first shifted by their minimum so
/// that adding a constant to every reward leaves the result unchanged.
pub fn compute_advantages(rewards: &[f64], variance_epsilon: f64) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::InvalidGroup(format!("group of {g} rewards; need at least 2")));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidGroup("non-finite reward".into()));
    }
    let min = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = rewards.iter().map(|r| r - min).collect();
    let mean = shifted.iter().sum::<f64>() / g as f64;
    let var = shifted.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g as f64;
    if var == 0.0 {
        return Ok(vec![0.0; g]);
    }
    let scale = (var + variance_epsilon).sqrt();
    Ok(shifted.iter().map(|r| (r - mean) / scale).collect())
}

fn rollout_rng(seed: u64, step: u64, member: u64) -> Rng {
    rng::stream(seed, Domain::Rollout, &[step, member])
}

/// `G` separate-budget decodes of one problem; member `g` uses rng stream
/// `(seed, step, offset + g)`.
#[allow(clippy::too_many_arguments)]
pub fn rollout_group<P: Policy>(
    policy: &P,
    problem: &Problem,
    budget: BudgetConfig,
    group_size: usize,
    temperature: f64,
    seed: u64,
    step: u64,
    offset: u64,
) -> Result<RolloutGroup> {
    if group_size < 2 {
        return Err(Error::InvalidGroup(format!("group of {group_size}; need at least 2")));
    }
    let trajectories: Vec<Trajectory> = (0..group_size as u64)
        .into_par_iter()
        .map(|g| {
            let mut rng = rollout_rng(seed, step, offset + g);
            let mut t = decode_separate_budget(policy, &problem.prompt_tokens, budget, temperature, &mut rng)?;
            t.problem_id = problem.id;
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let rewards = trajectories.iter().map(|t| taskgen::reward(t, problem)).collect();
    Ok(RolloutGroup { problem_id: problem.id, trajectories, rewards, advantages: Vec::new() })
}

/// Training examples for the groups: policy-chosen tokens only, each weighted by
/// its trajectory's advantage.
pub fn policy_gradient_batch(groups: &[RolloutGroup], length_normalize: bool) -> Result<Vec<SequenceExample>> {
    let mut batch = Vec::new();
    for group in groups {
        if group.advantages.len() != group.trajectories.len() {
            return Err(Error::InvalidGroup(format!("group {} has no advantages", group.problem_id)));
        }
        for (t, &a) in group.trajectories.iter().zip(&group.advantages) {
            let chosen = t.policy_chosen.iter().filter(|&&b| b).count();
            let weight = if length_normalize && chosen > 0 { a / chosen as f64 } else { a };
            batch.push(SequenceExample::uniform(t.context(), t.output(), t.policy_chosen.clone(), weight));
        }
    }
    Ok(batch)
}

/// Applies one ascent step on `J = mean(A · log p)` and returns the surrogate loss `-J`.
pub fn policy_gradient_step(
    params: &mut Parameters,
    optimizer: &mut Optimizer,
    groups: &[RolloutGroup],
    learning_rate: f64,
    length_normalize: bool,
) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::InvalidGroup("no groups".into()));
    }
    let batch = policy_gradient_batch(groups, length_normalize)?;
    let (loss, grads) = loss_and_gradients(params, &batch)?;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("non-finite loss {loss}")));
    }
    optimizer.step(params, &grads, learning_rate)?;
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    pub loss: f64,
    pub mean_thinking_tokens: f64,
    pub mean_solution_tokens: f64,
    pub forced_fraction: f64,
    /// Rollouts of this step have ids `first_rollout .. first_rollout + rollouts`.
    pub first_rollout: u64,
    pub rollouts: u64,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub initial_validation: Option<f64>,
    pub records: Vec<TrainRecord>,
}

pub const TRAIN_LOG_COLUMNS: [&str; 10] = [
    "step",
    "mean_reward",
    "mean_abs_advantage",
    "loss",
    "mean_thinking_tokens",
    "mean_solution_tokens",
    "forced_fraction",
    "first_rollout",
    "rollouts",
    "validation_pass_at_1",
];

impl TrainLog {
    /// Tab-separated table in [`TRAIN_LOG_COLUMNS`] order; the validation column is
    /// empty on steps without validation. Initial validation, if any, is a `#` comment.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(v) = self.initial_validation {
            out.push_str(&format!("# initial_validation_pass_at_1\t{v:.6}\n"));
        }
        out.push_str(&TRAIN_LOG_COLUMNS.join("\t"));
        out.push('\n');
        for r in &self.records {
            let v = r.validation.map(|v| format!("{v:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.9}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{v}\n",
                r.step,
                r.mean_reward,
                r.mean_abs_advantage,
                r.loss,
                r.mean_thinking_tokens,
                r.mean_solution_tokens,
                r.forced_fraction,
                r.first_rollout,
                r.rollouts
            ));
        }
        out
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_reward).collect()
    }

    /// Every rollout id appears in exactly one step.
    pub fn rollouts_are_fresh(&self) -> bool {
        let mut next = 0;
        self.records.iter().all(|r| {
            let ok = r.first_rollout == next;
            next += r.rollouts;
            ok
        })
    }
}

fn validate_at(params: &Parameters, config: &TrainConfig, validation: &[Problem]) -> Result<f64> {
    let problems = &validation[..validation.len().min(config.validation_problems)];
    Ok(pass_at_1(
        params,
        problems,
        Strategy::Separate,
        config.budget(),
        config.validation_samples,
        config.eval_temperature,
        config.seed,
    )?
    .accuracy)
}

/// On-policy GRPO: each step samples `B` problems, decodes a group of `G` per
/// problem, and uses those rollouts for exactly one update. `progress` is called
/// after every step.
pub fn train(
    config: &TrainConfig,
    mut params: Parameters,
    corpus: &[Problem],
    validation: &[Problem],
    mut progress: impl FnMut(&TrainRecord),
) -> Result<(Parameters, TrainLog)> {
    if corpus.is_empty() {
        return Err(Error::MissingData("empty training corpus".into()));
    }
    let longest = corpus.iter().chain(validation).map(|p| p.prompt_tokens.len()).max().unwrap_or(0);
    config.validate(params.config().context_length, longest)?;
    let validating = config.validation_every > 0 && !validation.is_empty();
    let mut log = TrainLog { initial_validation: None, records: Vec::with_capacity(config.steps) };
    if validating && config.steps > 0 {
        log.initial_validation = Some(validate_at(&params, config, validation)?);
    }
    let mut optimizer = Optimizer::new(config.optimizer, params.len());
    let b = config.batch_problems.min(corpus.len());
    let g = config.group_size;
    let mut next_rollout = 0u64;
    for step in 0..config.steps {
        let mut batch_rng = rng::stream(config.seed, Domain::Batch, &[step as u64]);
        let mut picks = index::sample(&mut batch_rng, corpus.len(), b).into_vec();
        picks.sort_unstable();
        let mut groups = picks
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                rollout_group(
                    &params,
                    &corpus[p],
                    config.budget(),
                    g,
                    config.rollout_temperature,
                    config.seed,
                    step as u64,
                    (i * g) as u64,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        for group in &mut groups {
            group.assign_advantages(config.variance_epsilon)?;
        }
        let loss = policy_gradient_step(
            &mut params,
            &mut optimizer,
            &groups,
            config.learning_rate,
            config.length_normalize,
        )?;
        let trajs: Vec<&Trajectory> = groups.iter().flat_map(|gr| &gr.trajectories).collect();
        let n = trajs.len() as f64;
        let mean = |f: &dyn Fn(&Trajectory) -> f64| trajs.iter().map(|t| f(t)).sum::<f64>() / n;
        let rollouts = trajs.len() as u64;
        let validation_pass = if validating && (step + 1) % config.validation_every == 0 {
            Some(validate_at(&params, config, validation)?)
        } else {
            None
        };
        let record = TrainRecord {
            step,
            mean_reward: groups.iter().flat_map(|gr| &gr.rewards).sum::<f64>() / n,
            mean_abs_advantage: groups.iter().flat_map(|gr| &gr.advantages).map(|a| a.abs()).sum::<f64>() / n,
            loss,
            mean_thinking_tokens: mean(&|t| t.think_tokens.len() as f64),
            mean_solution_tokens: mean(&|t| t.solution_tokens.len() as f64),
            forced_fraction: mean(&|t| if t.forced_think_end { 1.0 } else { 0.0 }),
            first_rollout: next_rollout,
            rollouts,
            validation: validation_pass,
        };
        next_rollout += rollouts;
        progress(&record);
        log.records.push(record);
    }
    Ok((params, log))
}
