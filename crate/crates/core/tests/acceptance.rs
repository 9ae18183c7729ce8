//! End-to-end acceptance run. Builds the default pipeline (corpus, warm start,
//! three GRPO seeds), then checks the ten acceptance criteria and prints one
//! PASS/FAIL line per criterion. Exits non-zero if any criterion fails.
//!
//! Takes roughly ten minutes on one core; most of it is the warm start.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng as _;

use elastic_core::config::RunConfig;
use elastic_core::decoder::{decode, BudgetConfig, Strategy};
use elastic_core::eval::{self, SweepReport};
use elastic_core::grpo::compute_advantages;
use elastic_core::model::{init_params, load_checkpoint, loss_and_gradients, ModelConfig, Parameters, SequenceExample};
use elastic_core::pipeline;
use elastic_core::rng::{self, Domain};
use elastic_core::stub::{from_weights, StubPolicy};
use elastic_core::taskgen::{self, CorpusSpec, DifficultyRange, Problem, Split};
use elastic_core::vocab::{self, TokenId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gradient_exactness() -> Outcome {
    let start = Instant::now();
    let params = init_params(&ModelConfig {
        context_length: 12,
        num_layers: 2,
        num_heads: 2,
        embed_dim: 8,
        mlp_dim: 16,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let mut r = rng::stream(3, Domain::Batch, &[]);
    let batch: Vec<SequenceExample> = (0..4)
        .map(|_| {
            let ctx: Vec<TokenId> = (0..r.gen_range(1..5)).map(|_| r.gen_range(0..32)).collect();
            let n = r.gen_range(1..=12 - ctx.len());
            SequenceExample {
                context: ctx,
                continuation: (0..n).map(|_| r.gen_range(0..32)).collect(),
                mask: (0..n).map(|_| r.gen_bool(0.8)).collect(),
                weights: (0..n).map(|_| r.gen_range(-1.5..1.5)).collect(),
            }
        })
        .collect();
    let (_, grads) = loss_and_gradients(&params, &batch).unwrap();
    let h = 1e-4;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..params.len() {
        let w = params.as_slice()[i];
        probe.as_mut_slice()[i] = w + h;
        let up = loss_and_gradients(&probe, &batch).unwrap().0;
        probe.as_mut_slice()[i] = w - h;
        let down = loss_and_gradients(&probe, &batch).unwrap().0;
        probe.as_mut_slice()[i] = w;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads.as_slice()[i];
        let diff = (numeric - analytic).abs();
        if diff <= 1e-8 {
            continue;
        }
        let rel = diff / numeric.abs().max(analytic.abs());
        worst = worst.max(rel);
        if rel > 1e-4 {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        params.len() <= 5000 && failures == 0 && secs < 60.0,
        format!("{} parameters, worst relative error {worst:.2e}, {failures} failures, {secs:.1}s", params.len()),
    )
}

fn random_stub(salt: u64) -> StubPolicy {
    StubPolicy::new(256, move |history| {
        let mut h = salt ^ 0x9e37_79b9_7f4a_7c15;
        for &t in history {
            h = (h ^ t as u64).wrapping_mul(0x100_0000_01b3);
        }
        let mut r = rng::stream(h, Domain::Eval, &[]);
        let w: Vec<f64> = (0..vocab::VOCAB_SIZE).map(|_| r.gen::<f64>().powi(3)).collect();
        from_weights(&w)
    })
}

fn budget_safety() -> Outcome {
    let problems = taskgen::generate_corpus(&CorpusSpec {
        seed: 1,
        count: 64,
        difficulty: DifficultyRange { min: 1, max: 10 },
        modulus: 10,
        split: Split::Test,
    })
    .unwrap();
    let stubs = [
        StubPolicy::never_terminating(256),
        StubPolicy::closes_thinking_at(256, 1),
        StubPolicy::closes_thinking_at(256, 7),
        StubPolicy::answering(256, 10, 5, 0.5),
        random_stub(1),
        random_stub(2),
    ];
    let mut r = rng::stream(2, Domain::Batch, &[]);
    let (mut violations, mut separate, mut entered, mut single_close) = (0, 0, 0, 0);
    for i in 0..10_000u64 {
        let strategy = Strategy::ALL[r.gen_range(0..3)];
        let budget = BudgetConfig::new(r.gen_range(1..48), r.gen_range(1..16));
        let policy = &stubs[r.gen_range(0..stubs.len())];
        let problem = &problems[r.gen_range(0..problems.len())];
        let temperature = r.gen_range(0.3..2.0);
        let mut sample = rng::stream(i, Domain::Eval, &[]);
        let t = decode(policy, strategy, problem, budget, temperature, &mut sample).unwrap();
        let over = match strategy {
            Strategy::Separate => {
                t.think_tokens.len() > budget.thinking || t.solution_tokens.len() > budget.solution
            }
            _ => t.output_len() > budget.total(),
        };
        if over || t.check().is_err() {
            violations += 1;
        }
        if strategy == Strategy::Separate {
            separate += 1;
            entered += usize::from(!t.solution_tokens.is_empty());
            single_close += usize::from(t.output().iter().filter(|&&x| x == vocab::THINK_CLOSE).count() == 1);
        }
    }
    outcome(
        violations == 0 && entered == separate && single_close == separate,
        format!(
            "10000 decodes, {violations} cap violations; separate: solution entered {entered}/{separate}, single </think> {single_close}/{separate}"
        ),
    )
}

fn advantage_contract() -> Outcome {
    let mut r = rng::stream(4, Domain::Batch, &[]);
    let mut worst_mean = 0.0f64;
    let mut worst_sd = 0.0f64;
    let mut vectors = 0;
    while vectors < 1000 {
        let g = r.gen_range(2..=64);
        let rewards: Vec<f64> = if r.gen_bool(0.5) {
            (0..g).map(|_| f64::from(u8::from(r.gen_bool(0.3)))).collect()
        } else {
            (0..g).map(|_| r.gen_range(-3.0..3.0)).collect()
        };
        if rewards.iter().all(|&x| x == rewards[0]) {
            continue;
        }
        vectors += 1;
        let a = compute_advantages(&rewards, 1e-8).unwrap();
        let n = a.len() as f64;
        let m = a.iter().sum::<f64>() / n;
        let sd = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(m.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }
    let zeros = (2..=64).all(|g| compute_advantages(&vec![0.7; g], 1e-8).unwrap().iter().all(|&x| x == 0.0));
    let example = compute_advantages(&[1.0, 0.0, 0.0, 0.0], 1e-8).unwrap();
    let expected = [1.7321, -0.5774, -0.5774, -0.5774];
    let matches = example.iter().zip(expected).all(|(a, e)| (a - e).abs() < 5e-5);
    outcome(
        worst_mean <= 1e-9 && worst_sd <= 1e-3 && zeros && matches,
        format!(
            "max |mean| {worst_mean:.1e}, max |sd-1| {worst_sd:.1e}, constant groups zero: {zeros}, [1,0,0,0] -> [{}]",
            example.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn composition_identity(problems: &[Problem]) -> Outcome {
    let budget = BudgetConfig::new(16, 2);
    let mut identical = 0;
    for seed in [11, 12, 13] {
        let m = init_params(&ModelConfig { seed, ..Default::default() }).unwrap();
        let plain = eval::pass_at_1(&m, problems, Strategy::Separate, budget, 2, 0.6, seed).unwrap();
        let composed = eval::cross_model_composition(&m, &m, problems, budget, 2, 0.6, seed).unwrap();
        if plain == composed && plain.accuracy.to_bits() == composed.accuracy.to_bits() {
            identical += 1;
        }
    }
    outcome(identical == 3, format!("{identical}/3 random checkpoints bit-identical over {} problems", problems.len()))
}

fn row_accuracy(report: &SweepReport, t: usize) -> f64 {
    report.rows.iter().find(|r| r.thinking_budget == t).map(|r| r.pass_at_1).unwrap()
}

fn fmt_curve(report: &SweepReport, ts: &[usize]) -> String {
    ts.iter().map(|&t| format!("{t}:{:.3}", row_accuracy(report, t))).collect::<Vec<_>>().join(" ")
}

fn training_effectiveness(base: &Parameters, trained: &[Parameters], test: &[Problem], c: &RunConfig) -> Outcome {
    let budget = BudgetConfig::new(c.thinking_budget, c.solution_budget);
    let acc = |m: &Parameters| {
        eval::pass_at_1(m, test, Strategy::Separate, budget, c.eval_samples, c.eval_temperature, c.seed).unwrap().accuracy
    };
    let b = acc(base);
    let gains: Vec<f64> = trained.iter().map(|m| acc(m) - b).collect();
    outcome(
        gains.iter().all(|&g| g >= 0.10),
        format!(
            "pass@1 at {budget}: warm start {b:.3}, gains per seed [{}]",
            gains.iter().map(|g| format!("{g:+.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn strategy_ordering(trained: &Parameters, test: &[Problem], c: &RunConfig) -> Outcome {
    let ts = [4, 8, 12, 16, 20];
    let budgets: Vec<_> = ts.iter().map(|&t| BudgetConfig::new(t, c.solution_budget)).collect();
    let reports: Vec<SweepReport> = Strategy::ALL
        .iter()
        .map(|&s| {
            eval::budget_sweep(trained, "trained", test, s, &budgets, c.eval_samples, c.eval_temperature, c.seed).unwrap()
        })
        .collect();
    let (sep, bf, van) = (&reports[0], &reports[1], &reports[2]);
    let ordered = ts
        .iter()
        .filter(|&&t| row_accuracy(sep, t) >= row_accuracy(bf, t) && row_accuracy(bf, t) >= row_accuracy(van, t))
        .count();
    let tight = ts[0];
    let strict = row_accuracy(sep, tight) > row_accuracy(van, tight);
    outcome(
        ordered * 4 >= ts.len() * 3 && strict,
        format!(
            "ordered at {ordered}/{} totals; separate [{}] budget-forcing [{}] vanilla [{}]",
            ts.len(),
            fmt_curve(sep, &ts),
            fmt_curve(bf, &ts),
            fmt_curve(van, &ts)
        ),
    )
}

fn budget_generalization(trained: &SweepReport, base: &SweepReport, t_star: usize) -> Outcome {
    let ts = [6, 8, 10, 12, 16, 20, 24, 32];
    let unseen = ts.iter().filter(|&&t| t != t_star).count();
    let pairs = ts.windows(2).filter(|w| row_accuracy(trained, w[1]) >= row_accuracy(trained, w[0])).count();
    let below: Vec<usize> = ts.iter().copied().filter(|&t| t < t_star).collect();
    let beats = below.iter().filter(|&&t| row_accuracy(trained, t) > row_accuracy(base, t)).count();
    outcome(
        unseen >= 5 && pairs * 5 >= (ts.len() - 1) * 4 && beats == below.len(),
        format!(
            "{unseen} unseen t, non-decreasing {pairs}/{} pairs, beats warm start below t* at {beats}/{}; trained [{}] warm start [{}]",
            ts.len() - 1,
            below.len(),
            fmt_curve(trained, &ts),
            fmt_curve(base, &ts)
        ),
    )
}

fn composition_direction(base: &Parameters, trained: &Parameters, test: &[Problem], c: &RunConfig) -> Outcome {
    let budgets: Vec<_> = [4, 6, 8, 12, 16].iter().map(|&t| BudgetConfig::new(t, c.solution_budget)).collect();
    let models = [("base", base), ("trained", trained)];
    let cells = eval::composition_grid(&models, test, &budgets, c.eval_samples, c.eval_temperature, c.seed).unwrap();
    let tight = budgets[0];
    let at = |th: &str, so: &str| {
        cells
            .iter()
            .find(|x| {
                x.thinking_model == th && x.solution_model == so && x.thinking_budget == tight.thinking
            })
            .map(|x| x.pass_at_1)
            .unwrap()
    };
    let (bb, bt, tb, tt) = (at("base", "base"), at("base", "trained"), at("trained", "base"), at("trained", "trained"));
    let mut detail = format!("at {tight}: base/base {bb:.3} base/trained {bt:.3} trained/base {tb:.3} trained/trained {tt:.3};");
    for b in &budgets[1..] {
        let row: Vec<String> = cells
            .iter()
            .filter(|x| x.thinking_budget == b.thinking)
            .map(|x| format!("{:.3}", x.pass_at_1))
            .collect();
        detail.push_str(&format!(" {b}: [{}]", row.join(" ")));
    }
    outcome(bt >= bb && tt >= bb && tt >= bt && tt >= tb, detail)
}

fn token_allocation(trained: &SweepReport) -> Outcome {
    let ts = [6, 8, 10, 12, 16, 20];
    let rows: Vec<_> = ts.iter().map(|&t| trained.rows.iter().find(|r| r.thinking_budget == t).unwrap()).collect();
    let increasing = rows.windows(2).all(|w| w[1].mean_thinking_tokens > w[0].mean_thinking_tokens);
    let sol: Vec<f64> = rows.iter().map(|r| r.mean_solution_tokens).collect();
    let (lo, hi) = sol.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let spread = (hi - lo) / lo;
    outcome(
        increasing && spread < 0.5,
        format!(
            "thinking [{}], solution spread {:.1}%",
            rows.iter().map(|r| format!("{}:{:.2}", r.thinking_budget, r.mean_thinking_tokens)).collect::<Vec<_>>().join(" "),
            100.0 * spread
        ),
    )
}

const REPRO_CONFIG: &str = r#"
train_count = 400
validation_count = 64
test_count = 64
warmstart_min_steps = 200
warmstart_max_steps = 200
warmstart_check_every = 100
compliance_threshold = 0.0
compliance_problems = 16
steps = 6
validation_every = 3
validation_problems = 16
batch_problems = 4
sweep_thinking_budgets = [4, 8, 16]
"#;

fn reproducibility(work: &Path) -> Outcome {
    fs::write(work.join("repro.toml"), REPRO_CONFIG).unwrap();
    let bin = env!("CARGO_BIN_EXE_elastic");
    let run = |tag: &str, workers: &str| -> Option<()> {
        let steps: [Vec<String>; 4] = [
            vec!["gen-data".into(), "--out".into(), format!("{tag}/data")],
            vec!["warmstart".into(), "--data".into(), format!("{tag}/data"), "--out".into(), format!("{tag}/ws")],
            vec![
                "train".into(),
                "--data".into(),
                format!("{tag}/data"),
                "--init-checkpoint".into(),
                format!("{tag}/ws/warmstart.ckpt"),
                "--out".into(),
                format!("{tag}/rl"),
            ],
            vec![
                "sweep".into(),
                "--data".into(),
                format!("{tag}/data"),
                "--out".into(),
                format!("{tag}/sweep"),
                format!("base={tag}/ws/warmstart.ckpt"),
                format!("trained={tag}/rl/model.ckpt"),
            ],
        ];
        for args in steps {
            let status = Command::new(bin)
                .current_dir(work)
                .args(&args)
                .args(["--config", "repro.toml", "--seed", "7", "--workers", workers])
                .output()
                .ok()?;
            if !status.status.success() {
                eprintln!("{}", String::from_utf8_lossy(&status.stderr));
                return None;
            }
        }
        Some(())
    };
    if run("a", "2").is_none() || run("b", "1").is_none() {
        return outcome(false, "pipeline command failed");
    }
    let files = [
        "ws/warmstart.ckpt",
        "ws/warmstart_log.tsv",
        "rl/model.ckpt",
        "rl/train_log.tsv",
        "sweep/sweep.csv",
        "sweep/allocation.csv",
    ];
    let same: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| fs::read(work.join("a").join(f)).ok() == fs::read(work.join("b").join(f)).ok())
        .collect();
    outcome(
        same.len() == files.len(),
        format!("{}/{} artifacts byte-identical across two runs (2 vs 1 workers)", same.len(), files.len()),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: BTreeMap<u32, Outcome> = BTreeMap::new();
    results.insert(1, gradient_exactness());
    results.insert(2, budget_safety());
    results.insert(3, advantage_contract());

    let work = tempfile::tempdir().unwrap();
    let dir = work.path();
    let config = RunConfig::default();
    let mut say = |line: &str| println!("  {line}");
    pipeline::gen_data(&config, &dir.join("data"), &mut say).unwrap();
    let warm = pipeline::run_warmstart(&config, &dir.join("data"), &dir.join("ws"), &mut say);
    if let Err(e) = &warm {
        println!("  warm start: {e}");
    }
    let ws_path = dir.join("ws").join(pipeline::WARMSTART_CHECKPOINT);
    let base = load_checkpoint(&ws_path).unwrap();
    println!("  warm start done at {:.0}s", start.elapsed().as_secs_f64());

    let mut trained = Vec::new();
    for seed in 0..3 {
        let c = RunConfig { seed, init_checkpoint: Some(ws_path.clone()), ..config.clone() };
        let out = dir.join(format!("rl{seed}"));
        pipeline::run_train(&c, &dir.join("data"), &out, &mut say).unwrap();
        trained.push(load_checkpoint(&out.join(pipeline::MODEL_CHECKPOINT)).unwrap());
    }
    println!("  training done at {:.0}s", start.elapsed().as_secs_f64());

    let test: Vec<Problem> = taskgen::read_corpus(&pipeline::split_path(&dir.join("data"), Split::Test))
        .unwrap()
        .iter()
        .map(|r| r.problem())
        .collect();
    let c = &config;
    let grid: Vec<_> = [4, 6, 8, 10, 12, 16, 20, 24, 32].iter().map(|&t| BudgetConfig::new(t, c.solution_budget)).collect();
    let sweep = |m: &Parameters, tag: &str| {
        eval::budget_sweep(m, tag, &test, Strategy::Separate, &grid, c.eval_samples, c.eval_temperature, c.seed).unwrap()
    };
    let base_sweep = sweep(&base, "base");
    let trained_sweep = sweep(&trained[0], "trained");

    results.insert(4, training_effectiveness(&base, &trained, &test, c));
    results.insert(5, strategy_ordering(&trained[0], &test, c));
    results.insert(6, budget_generalization(&trained_sweep, &base_sweep, c.thinking_budget));
    results.insert(7, composition_direction(&base, &trained[0], &test, c));
    results.insert(8, token_allocation(&trained_sweep));
    let pipeline_secs = start.elapsed().as_secs_f64();
    results.insert(9, reproducibility(dir));
    results.insert(10, composition_identity(&test[..64]));

    println!();
    for (n, o) in &results {
        println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.values().filter(|o| !o.pass).count();
    println!(
        "{}/{} criteria passed; pipeline {:.0}s, total {:.0}s",
        results.len() - failed,
        results.len(),
        pipeline_secs,
        start.elapsed().as_secs_f64()
    );
    if warm.is_err() || failed > 0 {
        std::process::exit(1);
    }
}
