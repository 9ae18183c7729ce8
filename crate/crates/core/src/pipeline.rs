//! The four pipeline commands (`gen-data`, `warmstart`, `train`, `sweep`), each
//! reading and writing plain files in a run directory and emitting a
//! `manifest.json` with the resolved configuration and SHA-256 digests.
//!
//! Output layout:
//!
//! | command     | files                                                              |
//! |-------------|--------------------------------------------------------------------|
//! | `gen-data`  | `train.jsonl`, `validation.jsonl`, `test.jsonl`                    |
//! | `warmstart` | `warmstart.ckpt`, `warmstart_log.tsv`                              |
//! | `train`     | `model.ckpt`, `train_log.tsv`                                      |
//! | `sweep`     | `sweep.csv`, `allocation.csv`, `summary.json`, optionally `composition.csv` and `trajectories.jsonl` |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::decoder::{Strategy, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::eval::{self, AllocationStats, CompositionCell, SweepReport};
use crate::grpo::{self, TrainLog};
use crate::model::{init_params, load_checkpoint, save_checkpoint, Parameters};
use crate::taskgen::{self, CorpusRecord, Problem, Split};
use crate::warmstart::{self, WarmstartLog};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const WARMSTART_CHECKPOINT: &str = "warmstart.ckpt";
pub const WARMSTART_LOG: &str = "warmstart_log.tsv";
pub const MODEL_CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.tsv";
pub const SWEEP_TABLE: &str = "sweep.csv";
pub const ALLOCATION_TABLE: &str = "allocation.csv";
pub const COMPOSITION_TABLE: &str = "composition.csv";
pub const SWEEP_SUMMARY: &str = "summary.json";
pub const TRAJECTORY_DUMP: &str = "trajectories.jsonl";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path, label: impl Into<String>) -> Result<Self> {
        let data = fs::read(path)?;
        Ok(FileDigest {
            path: label.into(),
            sha256: hex::encode(Sha256::digest(&data)),
            bytes: data.len() as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Input paths as given on the command line.
    pub inputs: Vec<FileDigest>,
    /// Output paths relative to the output directory.
    pub outputs: Vec<FileDigest>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            seed: config.seed,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path, path.display().to_string())?);
        Ok(())
    }

    fn output(&mut self, dir: &Path, name: &str) -> Result<()> {
        self.outputs.push(FileDigest::of(&dir.join(name), name)?);
        Ok(())
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }

    pub fn output_digest(&self, name: &str) -> Option<&str> {
        self.outputs.iter().find(|d| d.path == name).map(|d| d.sha256.as_str())
    }
}

pub fn split_path(data: &Path, split: Split) -> PathBuf {
    data.join(format!("{}.jsonl", split.name()))
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingData(format!("{} not found", path.display())))
    }
}

fn read_split(data: &Path, split: Split) -> Result<Vec<CorpusRecord>> {
    let path = split_path(data, split);
    require(&path)?;
    taskgen::read_corpus(&path)
}

fn problems(records: &[CorpusRecord]) -> Vec<Problem> {
    records.iter().map(CorpusRecord::problem).collect()
}

fn load_model(path: &Path) -> Result<Parameters> {
    require(path)?;
    load_checkpoint(path)
}

/// Writes the train/validation/test corpora with gold completions.
pub fn gen_data(config: &RunConfig, out: &Path, progress: &mut dyn FnMut(&str)) -> Result<RunManifest> {
    let specs: Vec<_> = Split::ALL.iter().map(|&s| config.corpus_spec(s)).collect();
    for spec in &specs {
        spec.validate()?;
    }
    fs::create_dir_all(out)?;
    let mut manifest = RunManifest::new("gen-data", config);
    for spec in &specs {
        let corpus = taskgen::generate_corpus(spec)?;
        let records: Vec<CorpusRecord> = corpus
            .iter()
            .map(|p| {
                let style = taskgen::gold_style(config.seed, p, config.terse_fraction);
                CorpusRecord::new(p, Some(taskgen::gold_completion(p, style)))
            })
            .collect();
        let path = split_path(out, spec.split);
        taskgen::write_corpus(&path, &records)?;
        manifest.output(out, &format!("{}.jsonl", spec.split.name()))?;
        progress(&format!("{}: {} problems", spec.split, records.len()));
    }
    manifest.summary = serde_json::json!({
        "train": config.train_count,
        "validation": config.validation_count,
        "test": config.test_count,
    });
    manifest.write(out)?;
    Ok(manifest)
}

/// Supervised warm start from a fresh initialization. Outputs are written even
/// when compliance stays below the threshold; that case then returns
/// [`Error::NotConverged`].
pub fn run_warmstart(
    config: &RunConfig,
    data: &Path,
    out: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<(RunManifest, WarmstartLog)> {
    let ws = config.warmstart_config();
    ws.validate()?;
    let train = read_split(data, Split::Train)?;
    let validation = problems(&read_split(data, Split::Validation)?);
    let mut params = init_params(&config.model_config())?;
    let log = warmstart::warmstart(&mut params, &train, &validation, &ws)?;
    for r in log.records.iter().filter(|r| r.compliance.is_some()) {
        progress(&format!(
            "step {:>5}  loss {:.4}  compliance {:.3}",
            r.step + 1,
            r.loss,
            r.compliance.unwrap_or(0.0)
        ));
    }
    fs::create_dir_all(out)?;
    save_checkpoint(&params, &out.join(WARMSTART_CHECKPOINT))?;
    fs::write(out.join(WARMSTART_LOG), log.to_tsv())?;
    let mut manifest = RunManifest::new("warmstart", config);
    manifest.input(&split_path(data, Split::Train))?;
    manifest.input(&split_path(data, Split::Validation))?;
    manifest.output(out, WARMSTART_CHECKPOINT)?;
    manifest.output(out, WARMSTART_LOG)?;
    manifest.summary = serde_json::json!({
        "steps": log.records.len(),
        "final_compliance": log.final_compliance,
        "converged": log.converged,
    });
    manifest.write(out)?;
    if !log.converged {
        return Err(Error::NotConverged(format!(
            "compliance {:.3} below {} after {} steps",
            log.final_compliance.unwrap_or(0.0),
            ws.compliance_threshold,
            log.records.len()
        )));
    }
    Ok((manifest, log))
}

/// GRPO training from `init_checkpoint` (or a fresh initialization).
pub fn run_train(
    config: &RunConfig,
    data: &Path,
    out: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<(RunManifest, TrainLog)> {
    let tc = config.train_config();
    let train = problems(&read_split(data, Split::Train)?);
    let validation = problems(&read_split(data, Split::Validation)?);
    let params = match &tc.init_checkpoint {
        Some(path) => load_model(path)?,
        None => init_params(&config.model_config())?,
    };
    let (params, log) = grpo::train(&tc, params, &train, &validation, |r| {
        if let Some(v) = r.validation {
            progress(&format!(
                "step {:>4}  reward {:.3}  thinking {:.1}  forced {:.2}  validation {:.3}",
                r.step + 1,
                r.mean_reward,
                r.mean_thinking_tokens,
                r.forced_fraction,
                v
            ));
        }
    })?;
    fs::create_dir_all(out)?;
    save_checkpoint(&params, &out.join(MODEL_CHECKPOINT))?;
    fs::write(out.join(TRAIN_LOG), log.to_tsv())?;
    let mut manifest = RunManifest::new("train", config);
    if let Some(path) = &tc.init_checkpoint {
        manifest.input(path)?;
    }
    manifest.input(&split_path(data, Split::Train))?;
    manifest.input(&split_path(data, Split::Validation))?;
    manifest.output(out, MODEL_CHECKPOINT)?;
    manifest.output(out, TRAIN_LOG)?;
    let last_validation = log.records.iter().rev().find_map(|r| r.validation);
    manifest.summary = serde_json::json!({
        "steps": log.records.len(),
        "initial_validation": log.initial_validation,
        "final_validation": last_validation,
    });
    manifest.write(out)?;
    Ok((manifest, log))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub tag: String,
    pub path: PathBuf,
}

impl std::str::FromStr for ModelSpec {
    type Err = Error;

    /// `tag=path`, or just `path` (tagged by its file stem).
    fn from_str(s: &str) -> Result<Self> {
        let (tag, path) = match s.split_once('=') {
            Some((tag, path)) => (tag.to_string(), PathBuf::from(path)),
            None => {
                let path = PathBuf::from(s);
                let tag = path
                    .file_stem()
                    .map(|x| x.to_string_lossy().into_owned())
                    .ok_or_else(|| Error::InvalidArgument(format!("cannot tag checkpoint {s:?}")))?;
                (tag, path)
            }
        };
        if tag.is_empty() || tag.contains(',') {
            return Err(Error::InvalidArgument(format!("bad model tag {tag:?}")));
        }
        Ok(ModelSpec { tag, path })
    }
}

#[derive(Debug, Clone)]
pub struct SweepRequest {
    pub models: Vec<ModelSpec>,
    pub strategies: Vec<Strategy>,
    /// Also run the thinking-model × solution-model grid over all model pairs.
    pub compose: bool,
    pub dump_trajectories: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedAllocation {
    pub model: String,
    pub stats: AllocationStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub reports: Vec<SweepReport>,
    pub allocation: Vec<TaggedAllocation>,
    pub composition: Vec<CompositionCell>,
}

/// Budget sweeps for every model and strategy, plus the composition grid.
pub fn run_sweep(
    config: &RunConfig,
    data: &Path,
    request: &SweepRequest,
    out: &Path,
    progress: &mut dyn FnMut(&str),
) -> Result<(RunManifest, SweepSummary)> {
    if request.models.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one checkpoint".into()));
    }
    if request.strategies.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one strategy".into()));
    }
    let test_path = split_path(data, Split::Test);
    let mut test = problems(&read_split(data, Split::Test)?);
    if config.eval_problems > 0 {
        test.truncate(config.eval_problems);
    }
    let models = request
        .models
        .iter()
        .map(|m| Ok((m.tag.clone(), load_model(&m.path)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut budgets = config.sweep_budgets();
    if config.sweep_reference {
        let ctx = models.iter().map(|(_, p)| p.config().context_length).min().unwrap_or(0);
        budgets.push(eval::reference_budget(ctx, &test, config.sweep_solution_budget)?);
    }
    fs::create_dir_all(out)?;
    let mut dump = if request.dump_trajectories {
        Some(BufWriter::new(fs::File::create(out.join(TRAJECTORY_DUMP))?))
    } else {
        None
    };
    let mut summary = SweepSummary { reports: Vec::new(), allocation: Vec::new(), composition: Vec::new() };
    for (tag, params) in &models {
        for &strategy in &request.strategies {
            let sweep = eval::sweep(
                params,
                tag,
                &test,
                strategy,
                &budgets,
                config.eval_samples,
                config.eval_temperature,
                config.seed,
            )?;
            for row in &sweep.report.rows {
                progress(&format!(
                    "{tag} {strategy} {}+{}: pass@1 {:.3}  thinking {:.1}  solution {:.1}",
                    row.thinking_budget,
                    row.solution_budget,
                    row.pass_at_1,
                    row.mean_thinking_tokens,
                    row.mean_solution_tokens
                ));
            }
            if let Some(w) = dump.as_mut() {
                for e in &sweep.evaluations {
                    for (t, &r) in e.trajectories.iter().zip(&e.rewards) {
                        let line = serde_json::to_string(&TrajectoryRecord::new(t, r))
                            .map_err(|e| Error::Format(e.to_string()))?;
                        writeln!(w, "{line}")?;
                    }
                }
            }
            let stats = eval::token_allocation_stats(sweep.trajectories())?;
            summary.allocation.push(TaggedAllocation { model: tag.clone(), stats });
            summary.reports.push(sweep.report);
        }
    }
    if let Some(mut w) = dump {
        w.flush()?;
    }
    if request.compose {
        let refs: Vec<(&str, &Parameters)> = models.iter().map(|(t, p)| (t.as_str(), p)).collect();
        summary.composition = eval::composition_grid(
            &refs,
            &test,
            &config.sweep_budgets(),
            config.eval_samples,
            config.eval_temperature,
            config.seed,
        )?;
        for c in &summary.composition {
            progress(&format!(
                "compose {}+{} thinking={} solution={}: pass@1 {:.3}",
                c.thinking_budget, c.solution_budget, c.thinking_model, c.solution_model, c.pass_at_1
            ));
        }
    }

    let mut table = format!("{}\n", eval::SWEEP_COLUMNS);
    for r in &summary.reports {
        table.push_str(&r.csv_rows());
    }
    fs::write(out.join(SWEEP_TABLE), table)?;
    let mut alloc = format!("model,{}\n", eval::ALLOCATION_COLUMNS);
    for a in &summary.allocation {
        for line in a.stats.to_csv().lines().skip(1) {
            alloc.push_str(&format!("{},{line}\n", a.model));
        }
    }
    fs::write(out.join(ALLOCATION_TABLE), alloc)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(out.join(SWEEP_SUMMARY), json + "\n")?;

    let mut manifest = RunManifest::new("sweep", config);
    for m in &request.models {
        manifest.input(&m.path)?;
    }
    manifest.input(&test_path)?;
    manifest.output(out, SWEEP_TABLE)?;
    manifest.output(out, ALLOCATION_TABLE)?;
    manifest.output(out, SWEEP_SUMMARY)?;
    if request.compose {
        fs::write(out.join(COMPOSITION_TABLE), eval::composition_csv(&summary.composition))?;
        manifest.output(out, COMPOSITION_TABLE)?;
    }
    if request.dump_trajectories {
        manifest.output(out, TRAJECTORY_DUMP)?;
    }
    manifest.summary = serde_json::json!({
        "models": request.models.iter().map(|m| m.tag.clone()).collect::<Vec<_>>(),
        "strategies": request.strategies.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "budgets": budgets.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "problems": test.len(),
    });
    manifest.write(out)?;
    Ok((manifest, summary))
}
