use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use elastic_core::config::RunConfig;
use elastic_core::decoder::Strategy;
use elastic_core::pipeline::{self, ModelSpec, SweepRequest};
use elastic_core::{Error, Result};

/// Budget-constrained reasoning experiments on a tiny transformer.
///
/// Exit codes: 0 success, 1 budget violation, 2 invalid config or arguments,
/// 3 missing or malformed data, 4 divergence, 5 I/O failure, 6 warm start did
/// not reach the compliance threshold.
#[derive(Parser)]
#[command(name = "elastic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set steps=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for rollouts and evaluation (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/validation/test corpora with gold scratchpads.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Supervised warm start on the gold scratchpads.
    Warmstart {
        #[command(flatten)]
        common: Common,
        /// Directory holding the corpus files.
        #[arg(long)]
        data: PathBuf,
        /// Maximum number of optimizer steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// GRPO training under separate thinking and solution budgets.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Thinking budget used during training.
        #[arg(long)]
        t_star: Option<usize>,
        /// Solution budget used during training.
        #[arg(long)]
        s_star: Option<usize>,
        #[arg(long)]
        init_checkpoint: Option<PathBuf>,
    },
    /// Evaluate checkpoints over a grid of budgets.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoints as `tag=path` or `path`.
        #[arg(required = true)]
        checkpoints: Vec<ModelSpec>,
        /// Decoding strategy; repeatable. Defaults to all three.
        #[arg(long = "strategy")]
        strategies: Vec<Strategy>,
        /// Comma-separated thinking budgets (overrides `sweep_thinking_budgets`).
        #[arg(long, value_delimiter = ',')]
        budgets: Vec<usize>,
        /// Solution budget (overrides `sweep_solution_budget`).
        #[arg(long)]
        solution_budget: Option<usize>,
        /// Also evaluate every thinking-model × solution-model pair.
        #[arg(long)]
        compose: bool,
        /// Write every trajectory to trajectories.jsonl.
        #[arg(long)]
        dump_trajectories: bool,
    },
}

fn resolve(common: &Common, extra: Vec<String>) -> Result<RunConfig> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    overrides.extend(extra);
    base.with_overrides(&overrides)
}

fn set_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Error::InvalidArgument("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut say = |line: &str| println!("{line}");
    match cli.command {
        Command::GenData { common } => {
            set_workers(common.workers)?;
            let config = resolve(&common, vec![])?;
            pipeline::gen_data(&config, &common.out, &mut say)?;
        }
        Command::Warmstart { common, data, steps } => {
            set_workers(common.workers)?;
            let mut extra = vec![];
            if let Some(n) = steps {
                extra.push(format!("warmstart_max_steps={n}"));
            }
            let mut config = resolve(&common, extra)?;
            config.warmstart_min_steps = config.warmstart_min_steps.min(config.warmstart_max_steps);
            let (_, log) = pipeline::run_warmstart(&config, &data, &common.out, &mut say)?;
            println!(
                "warm start done after {} steps, compliance {:.3}",
                log.records.len(),
                log.final_compliance.unwrap_or(f64::NAN)
            );
        }
        Command::Train { common, data, steps, t_star, s_star, init_checkpoint } => {
            set_workers(common.workers)?;
            let mut config = resolve(&common, vec![])?;
            if let Some(n) = steps {
                config.steps = n;
            }
            if let Some(t) = t_star {
                config.thinking_budget = t;
            }
            if let Some(s) = s_star {
                config.solution_budget = s;
            }
            if init_checkpoint.is_some() {
                config.init_checkpoint = init_checkpoint;
            }
            let (manifest, _) = pipeline::run_train(&config, &data, &common.out, &mut say)?;
            println!("{}", manifest.summary);
        }
        Command::Sweep { common, data, checkpoints, strategies, budgets, solution_budget, compose, dump_trajectories } => {
            set_workers(common.workers)?;
            let mut config = resolve(&common, vec![])?;
            if !budgets.is_empty() {
                config.sweep_thinking_budgets = budgets;
            }
            if let Some(s) = solution_budget {
                config.sweep_solution_budget = s;
            }
            let strategies = if strategies.is_empty() { Strategy::ALL.to_vec() } else { strategies };
            let request = SweepRequest { models: checkpoints, strategies, compose, dump_trajectories };
            pipeline::run_sweep(&config, &data, &request, &common.out, &mut say)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
