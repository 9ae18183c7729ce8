//! Pass@1 evaluation, budget sweeps, token-allocation histograms and
//! thinking/solution cross-model composition.
//!
//! Every (problem, sample) pair decodes from its own rng stream keyed by
//! `(seed, problem id, sample index)`, so results do not depend on the strategy
//! being compared, the budget, or the number of workers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{self, BudgetConfig, Strategy, Trajectory};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::rng::{self, Domain, Rng};
use crate::taskgen::{self, Problem};

pub const DEFAULT_EVAL_TEMPERATURE: f64 = 0.6;

pub fn sample_rng(seed: u64, problem: &Problem, sample: usize) -> Rng {
    rng::stream(seed, Domain::Eval, &[problem.id, sample as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Problem-major order: all samples of problem 0, then problem 1, ...
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
}

fn evaluate<F>(problems: &[Problem], n_samples: usize, decode: F) -> Result<Evaluation>
where
    F: Fn(&Problem, usize) -> Result<Trajectory> + Sync,
{
    if problems.is_empty() {
        return Err(Error::InvalidArgument("no problems to evaluate".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let scored: Vec<(Trajectory, f64)> = (0..problems.len() * n_samples)
        .into_par_iter()
        .map(|i| {
            let problem = &problems[i / n_samples];
            let traj = decode(problem, i % n_samples)?;
            traj.check()?;
            let r = taskgen::reward(&traj, problem);
            Ok((traj, r))
        })
        .collect::<Result<_>>()?;
    let (trajectories, rewards): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let accuracy = rewards.iter().sum::<f64>() / rewards.len() as f64;
    Ok(Evaluation { accuracy, trajectories, rewards })
}

/// Mean reward over `n_samples` decodes of every problem.
pub fn pass_at_1<P: Policy>(
    policy: &P,
    problems: &[Problem],
    strategy: Strategy,
    budget: BudgetConfig,
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<Evaluation> {
    evaluate(problems, n_samples, |problem, k| {
        decoder::decode(policy, strategy, problem, budget, temperature, &mut sample_rng(seed, problem, k))
    })
}

/// Separate-budget pass@1 with thinking from `thinker` and the solution from
/// `solver`. With `thinker == solver` this equals [`pass_at_1`] bit for bit.
pub fn cross_model_composition<P: Policy, Q: Policy>(
    thinker: &P,
    solver: &Q,
    problems: &[Problem],
    budget: BudgetConfig,
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<Evaluation> {
    if thinker.vocab_size() != solver.vocab_size() {
        return Err(Error::IncompatibleModels(format!(
            "vocabulary sizes {} and {} differ",
            thinker.vocab_size(),
            solver.vocab_size()
        )));
    }
    evaluate(problems, n_samples, |problem, k| {
        let mut t = decoder::decode_composed(
            thinker,
            solver,
            &problem.prompt_tokens,
            budget,
            temperature,
            &mut sample_rng(seed, problem, k),
        )?;
        t.problem_id = problem.id;
        Ok(t)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub total_budget: usize,
    pub pass_at_1: f64,
    pub mean_thinking_tokens: f64,
    pub mean_solution_tokens: f64,
    pub mean_total_tokens: f64,
    pub forced_fraction: f64,
    pub samples: usize,
}

impl SweepRow {
    fn from_evaluation(budget: BudgetConfig, eval: &Evaluation) -> Self {
        let n = eval.trajectories.len() as f64;
        let mean = |f: &dyn Fn(&Trajectory) -> f64| eval.trajectories.iter().map(f).sum::<f64>() / n;
        SweepRow {
            thinking_budget: budget.thinking,
            solution_budget: budget.solution,
            total_budget: budget.total(),
            pass_at_1: eval.accuracy,
            mean_thinking_tokens: mean(&|t| t.think_tokens.len() as f64),
            mean_solution_tokens: mean(&|t| t.solution_tokens.len() as f64),
            mean_total_tokens: mean(&|t| t.output_len() as f64),
            forced_fraction: mean(&|t| if t.forced_think_end { 1.0 } else { 0.0 }),
            samples: eval.trajectories.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub model: String,
    pub strategy: Strategy,
    /// Sorted by thinking budget, then solution budget.
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_COLUMNS: &str = "model,strategy,thinking_budget,solution_budget,total_budget,pass_at_1,\
mean_thinking_tokens,mean_solution_tokens,mean_total_tokens,forced_fraction,samples";

impl SweepReport {
    pub fn accuracies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pass_at_1).collect()
    }

    /// CSV body rows (no header), so several reports can share one table.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.4},{:.4},{:.4},{:.4},{}",
                self.model,
                self.strategy,
                r.thinking_budget,
                r.solution_budget,
                r.total_budget,
                r.pass_at_1,
                r.mean_thinking_tokens,
                r.mean_solution_tokens,
                r.mean_total_tokens,
                r.forced_fraction,
                r.samples
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{SWEEP_COLUMNS}\n{}", self.csv_rows())
    }
}

/// A sweep with the trajectories behind each row (same order as the rows).
#[derive(Debug, Clone)]
pub struct Sweep {
    pub report: SweepReport,
    pub evaluations: Vec<Evaluation>,
}

impl Sweep {
    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.evaluations.iter().flat_map(|e| &e.trajectories)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn sweep<P: Policy>(
    policy: &P,
    model: &str,
    problems: &[Problem],
    strategy: Strategy,
    budgets: &[BudgetConfig],
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<Sweep> {
    if budgets.is_empty() {
        return Err(Error::InvalidArgument("empty budget grid".into()));
    }
    let mut budgets = budgets.to_vec();
    budgets.sort();
    budgets.dedup();
    let mut rows = Vec::with_capacity(budgets.len());
    let mut evaluations = Vec::with_capacity(budgets.len());
    for &b in &budgets {
        let eval = pass_at_1(policy, problems, strategy, b, n_samples, temperature, seed)?;
        rows.push(SweepRow::from_evaluation(b, &eval));
        evaluations.push(eval);
    }
    Ok(Sweep {
        report: SweepReport { model: model.to_string(), strategy, rows },
        evaluations,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn budget_sweep<P: Policy>(
    policy: &P,
    model: &str,
    problems: &[Problem],
    strategy: Strategy,
    budgets: &[BudgetConfig],
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<SweepReport> {
    Ok(sweep(policy, model, problems, strategy, budgets, n_samples, temperature, seed)?.report)
}

/// Largest separate budget that fits every problem with solution budget `solution`.
pub fn reference_budget(context_length: usize, problems: &[Problem], solution: usize) -> Result<BudgetConfig> {
    let longest = problems.iter().map(|p| p.prompt_tokens.len()).max().unwrap_or(0);
    context_length
        .checked_sub(longest + 1 + solution)
        .filter(|&t| t >= 1)
        .map(|t| BudgetConfig::new(t, solution))
        .ok_or_else(|| Error::InvalidBudget(format!("no room for thinking with solution budget {solution}")))
}

/// Histogram bin width used for a thinking budget `t`.
pub fn bin_width(thinking_budget: usize) -> usize {
    (thinking_budget / 16).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetHistogram {
    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub bin_width: usize,
    /// `thinking[i]` counts trajectories with thinking length in `[i*w, (i+1)*w)`.
    pub thinking: Vec<usize>,
    pub solution: Vec<usize>,
    pub count: usize,
    pub mean_thinking_tokens: f64,
    pub mean_solution_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationStats {
    pub strategy: Strategy,
    /// One histogram per budget, ascending.
    pub budgets: Vec<BudgetHistogram>,
}

pub const ALLOCATION_COLUMNS: &str = "strategy,thinking_budget,solution_budget,segment,bin_start,bin_end,count";

impl AllocationStats {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{ALLOCATION_COLUMNS}\n");
        for h in &self.budgets {
            for (segment, bins) in [("thinking", &h.thinking), ("solution", &h.solution)] {
                for (i, &n) in bins.iter().enumerate() {
                    let start = i * h.bin_width;
                    writeln!(
                        out,
                        "{},{},{},{segment},{start},{},{n}",
                        self.strategy,
                        h.thinking_budget,
                        h.solution_budget,
                        start + h.bin_width
                    )
                    .unwrap();
                }
            }
        }
        out
    }
}

pub fn token_allocation_stats<'a, I>(trajectories: I) -> Result<AllocationStats>
where
    I: IntoIterator<Item = &'a Trajectory>,
{
    let mut strategy = None;
    let mut groups: BTreeMap<(usize, usize), Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        if *strategy.get_or_insert(t.strategy) != t.strategy {
            return Err(Error::InvalidArgument("trajectories mix decoding strategies".into()));
        }
        groups.entry(t.budget.pair()).or_default().push(t);
    }
    let strategy = strategy.ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
    let budgets = groups
        .into_iter()
        .map(|((tb, sb), ts)| {
            let w = bin_width(tb);
            let cap = ts[0].budget.cap();
            let mut thinking = vec![0; cap / w + 1];
            let mut solution = vec![0; cap / w + 1];
            for t in &ts {
                thinking[t.think_tokens.len() / w] += 1;
                solution[t.solution_tokens.len() / w] += 1;
            }
            let n = ts.len() as f64;
            BudgetHistogram {
                thinking_budget: tb,
                solution_budget: sb,
                bin_width: w,
                thinking,
                solution,
                count: ts.len(),
                mean_thinking_tokens: ts.iter().map(|t| t.think_tokens.len() as f64).sum::<f64>() / n,
                mean_solution_tokens: ts.iter().map(|t| t.solution_tokens.len() as f64).sum::<f64>() / n,
            }
        })
        .collect();
    Ok(AllocationStats { strategy, budgets })
}

/// One cell of a thinking-model × solution-model × budget grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCell {
    pub thinking_model: String,
    pub solution_model: String,
    pub thinking_budget: usize,
    pub solution_budget: usize,
    pub pass_at_1: f64,
    pub samples: usize,
}

pub const COMPOSITION_COLUMNS: &str =
    "thinking_model,solution_model,thinking_budget,solution_budget,pass_at_1,samples";

/// Every ordered pair of `models` at every budget.
pub fn composition_grid<P: Policy>(
    models: &[(&str, &P)],
    problems: &[Problem],
    budgets: &[BudgetConfig],
    n_samples: usize,
    temperature: f64,
    seed: u64,
) -> Result<Vec<CompositionCell>> {
    let mut cells = Vec::new();
    for &b in budgets {
        for (tname, thinker) in models {
            for (sname, solver) in models {
                let e = cross_model_composition(*thinker, *solver, problems, b, n_samples, temperature, seed)?;
                cells.push(CompositionCell {
                    thinking_model: tname.to_string(),
                    solution_model: sname.to_string(),
                    thinking_budget: b.thinking,
                    solution_budget: b.solution,
                    pass_at_1: e.accuracy,
                    samples: e.trajectories.len(),
                });
            }
        }
    }
    Ok(cells)
}

pub fn composition_csv(cells: &[CompositionCell]) -> String {
    let mut out = format!("{COMPOSITION_COLUMNS}\n");
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            c.thinking_model, c.solution_model, c.thinking_budget, c.solution_budget, c.pass_at_1, c.samples
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::stub::StubPolicy;
    use crate::taskgen::{generate_corpus, CorpusSpec, DifficultyRange, Split};

    fn problems(count: usize) -> Vec<Problem> {
        generate_corpus(&CorpusSpec {
            seed: 3,
            count,
            difficulty: DifficultyRange { min: 2, max: 6 },
            modulus: 10,
            split: Split::Test,
        })
        .unwrap()
    }

    #[test]
    fn always_correct_stub_scores_one() {
        let stub = StubPolicy::answering(96, 10, 4, 1.0);
        let e = pass_at_1(&stub, &problems(20), Strategy::Separate, BudgetConfig::new(8, 4), 2, 1.0, 0).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e.trajectories.len(), 40);
    }

    #[test]
    fn coin_flip_stub_within_binomial_bound() {
        let stub = StubPolicy::answering(96, 10, 4, 0.5);
        let e = pass_at_1(&stub, &problems(200), Strategy::Separate, BudgetConfig::new(8, 4), 8, 1.0, 5).unwrap();
        let sigma = (0.25f64 / 1600.0).sqrt();
        assert!((e.accuracy - 0.5).abs() <= 3.0 * sigma, "accuracy {}", e.accuracy);
    }

    #[test]
    fn doubling_samples_keeps_expected_accuracy() {
        let stub = StubPolicy::answering(96, 10, 4, 0.3);
        let ps = problems(200);
        let a = pass_at_1(&stub, &ps, Strategy::Separate, BudgetConfig::new(8, 4), 4, 1.0, 1).unwrap();
        let b = pass_at_1(&stub, &ps, Strategy::Separate, BudgetConfig::new(8, 4), 8, 1.0, 2).unwrap();
        let sigma = (0.21f64 / 800.0).sqrt();
        assert!((a.accuracy - 0.3).abs() <= 3.0 * sigma);
        assert!((b.accuracy - 0.3).abs() <= 3.0 * sigma);
    }

    #[test]
    fn deterministic_and_rejects_empty_input() {
        let params = init_params(&ModelConfig { seed: 2, ..Default::default() }).unwrap();
        let ps = problems(6);
        let b = BudgetConfig::new(10, 4);
        let a = pass_at_1(&params, &ps, Strategy::Separate, b, 2, 0.6, 9).unwrap();
        let c = pass_at_1(&params, &ps, Strategy::Separate, b, 2, 0.6, 9).unwrap();
        assert_eq!(a, c);
        assert!(matches!(
            pass_at_1(&params, &[], Strategy::Separate, b, 2, 0.6, 9),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            pass_at_1(&params, &ps, Strategy::Separate, b, 0, 0.6, 9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sweep_rows_are_sorted_and_within_budget() {
        let stub = StubPolicy::never_terminating(96);
        let ps = problems(10);
        let budgets = [BudgetConfig::new(16, 4), BudgetConfig::new(4, 4), BudgetConfig::new(8, 4)];
        let report = budget_sweep(&stub, "stub", &ps, Strategy::Separate, &budgets, 2, 1.0, 0).unwrap();
        let ts: Vec<usize> = report.rows.iter().map(|r| r.thinking_budget).collect();
        assert_eq!(ts, vec![4, 8, 16]);
        for r in &report.rows {
            assert!(r.mean_thinking_tokens <= r.thinking_budget as f64);
            assert!(r.mean_solution_tokens <= r.solution_budget as f64);
            assert!((r.mean_total_tokens - r.mean_thinking_tokens - r.mean_solution_tokens).abs() < 1e-9);
            assert_eq!(r.forced_fraction, 1.0);
        }
        let direct = pass_at_1(&stub, &ps, Strategy::Separate, budgets[1], 2, 1.0, 0).unwrap();
        assert_eq!(report.rows[0].pass_at_1, direct.accuracy);
        assert_eq!(report.to_csv().lines().count(), 4);
    }

    #[test]
    fn allocation_histograms() {
        let stub = StubPolicy::never_terminating(96);
        let ps = problems(50);
        let budgets = [BudgetConfig::new(8, 4), BudgetConfig::new(40, 4)];
        let s = sweep(&stub, "stub", &ps, Strategy::Separate, &budgets, 2, 1.0, 0).unwrap();
        let stats = token_allocation_stats(s.trajectories()).unwrap();
        assert_eq!(stats.budgets.len(), 2);
        for h in &stats.budgets {
            assert_eq!(h.count, 100);
            assert_eq!(h.thinking.iter().sum::<usize>(), 100);
            assert_eq!(h.solution.iter().sum::<usize>(), 100);
            // every decode is forced, so all mass sits in the bin holding t
            assert_eq!(h.thinking[h.thinking_budget / h.bin_width], 100);
        }
        assert_eq!(stats.budgets[1].bin_width, 2);
        assert!(stats.budgets[0].mean_thinking_tokens < stats.budgets[1].mean_thinking_tokens);
        assert!(matches!(token_allocation_stats(std::iter::empty()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn allocation_rejects_mixed_strategies() {
        let stub = StubPolicy::never_terminating(96);
        let ps = problems(2);
        let a = pass_at_1(&stub, &ps, Strategy::Separate, BudgetConfig::new(8, 4), 1, 1.0, 0).unwrap();
        let b = pass_at_1(&stub, &ps, Strategy::Vanilla, BudgetConfig::new(8, 4), 1, 1.0, 0).unwrap();
        let all: Vec<&Trajectory> = a.trajectories.iter().chain(&b.trajectories).collect();
        assert!(token_allocation_stats(all).is_err());
    }

    #[test]
    fn composition_identity_and_vocab_check() {
        let params = init_params(&ModelConfig { seed: 11, ..Default::default() }).unwrap();
        let ps = problems(5);
        let b = BudgetConfig::new(12, 4);
        let direct = pass_at_1(&params, &ps, Strategy::Separate, b, 3, 0.6, 4).unwrap();
        let composed = cross_model_composition(&params, &params, &ps, b, 3, 0.6, 4).unwrap();
        assert_eq!(direct, composed);

        let other = init_params(&ModelConfig { vocab_size: 40, ..Default::default() }).unwrap();
        assert!(matches!(
            cross_model_composition(&params, &other, &ps, b, 1, 0.6, 4),
            Err(Error::IncompatibleModels(_))
        ));
    }

    #[test]
    fn reference_budget_fills_context() {
        let ps = problems(10);
        let longest = ps.iter().map(|p| p.prompt_tokens.len()).max().unwrap();
        let b = reference_budget(192, &ps, 4).unwrap();
        assert_eq!(longest + 1 + b.total(), 192);
        assert!(reference_budget(longest + 3, &ps, 4).is_err());
    }
}
