//! Command-line layer: argument parsing, experiment orchestration and the
//! on-disk run layout.
//!
//! Every command writes into one output directory and finishes by writing
//! `manifest.json`, which records the config snapshot, the seed, the artifact
//! file names (relative to the directory), metrics and timings. A directory
//! that already holds a manifest is left alone unless `--force` is given.
//!
//! Layout version 1 artifacts, depending on the command:
//!
//! | file | content |
//! |------|---------|
//! | `config.toml` | the effective config |
//! | `schedule.bin` | the training schedule (H* for a search) |
//! | `distribution.bin` | final estimated P(D), or the distribution a static run drew from |
//! | `static_distribution.bin` | smoothed whole-run estimate, ready for `static` |
//! | `model.bin` | final model |
//! | `run_log.txt` | one line per exploit step |
//! | `comparison.json` | per-seed condition metrics |
//! | `<id>_<CONDITION>_s<seed>_<table>.csv` | exported tables |
//!
//! If `AUTOSAMPLING_OUTPUT_ROOT` is set, relative output directories resolve
//! under it.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::{DatasetSource, ExperimentConfig, SearchOverrides};

use crate::analysis::{
    compare_conditions_with, frequency_loss_table, make_static_schedule, replay_run, segment_histogram,
    static_distribution, ComparisonTable, Condition, StaticSource,
};
use crate::dataset::Dataset;
use crate::distribution::SamplingDistribution;
use crate::error::{Error, Result};
use crate::format;
use crate::rng::{Domain, RngStream};
use crate::sampling::smooth_distribution;
use crate::schedule::{Provenance, SamplingSchedule};
use crate::search::{run_autosampling, uniform_run_schedule};
use crate::trainer::{per_sample_losses, EvalResult, ModelState};

pub const LAYOUT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const OUTPUT_ROOT_ENV: &str = "AUTOSAMPLING_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub layout_version: u32,
    pub engine_version: String,
    pub command: String,
    pub experiment_id: String,
    pub condition: Option<Condition>,
    pub seed: u64,
    /// Effective config with absolute dataset paths.
    pub config: ExperimentConfig,
    /// Files read from outside the output directory.
    pub inputs: BTreeMap<String, PathBuf>,
    /// Files written, relative to the output directory.
    pub artifacts: BTreeMap<String, PathBuf>,
    pub metrics: BTreeMap<String, f64>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl ExperimentManifest {
    fn new(command: &str, id: &str, condition: Option<Condition>, config: &ExperimentConfig) -> Self {
        ExperimentManifest {
            layout_version: LAYOUT_VERSION,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            experiment_id: id.to_string(),
            condition,
            seed: config.search.seed,
            config: config.clone(),
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
            metrics: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    /// Reads `manifest.json` from a run directory.
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { offset: 0, message: format!("{}: {e}", path.display()) })?;
        if m.layout_version != LAYOUT_VERSION {
            return Err(Error::Config(format!(
                "{} uses layout version {}, expected {LAYOUT_VERSION}",
                path.display(),
                m.layout_version
            )));
        }
        Ok(m)
    }

    /// Absolute path of a named artifact of the run stored in `run_dir`.
    pub fn artifact(&self, run_dir: &Path, name: &str) -> Result<PathBuf> {
        self.artifacts
            .get(name)
            .map(|p| run_dir.join(p))
            .ok_or_else(|| Error::Config(format!("run in {} has no `{name}` artifact", run_dir.display())))
    }

    fn record_eval(&mut self, prefix: &str, e: &EvalResult) {
        self.metrics.insert(format!("{prefix}metric"), e.metric);
        self.metrics.insert(format!("{prefix}loss"), e.loss);
        self.metrics.insert(format!("{prefix}correct"), e.correct as f64);
        self.metrics.insert(format!("{prefix}num_eval_samples"), e.num_eval_samples as f64);
    }
}

#[derive(Debug, Parser)]
#[command(name = "autosampling", version, about = "Search, replay and analyse data sampling schedules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the AutoSampling search.
    Search(SearchArgs),
    /// Plain training on shuffled epochs.
    Baseline(SearchArgs),
    /// Train on a schedule drawn i.i.d. from a stored distribution.
    Static(StaticArgs),
    /// Retrain on a recorded schedule, optionally with another architecture.
    Replay(ReplayArgs),
    /// Export histograms, frequency/loss tables and comparison tables.
    Analyze(AnalyzeArgs),
    /// UNIFORM / STATIC / DYNAMIC over several seeds.
    Compare(CompareArgs),
    /// Write the configured dataset as CSV files.
    Dataset(SearchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TOML config; defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: SearchOverrides,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Overwrite a directory that already holds a run.
    #[arg(long)]
    pub force: bool,
    /// Experiment id used in file names; defaults to the directory name.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StaticArgs {
    /// Distribution file (ASDS).
    #[arg(long)]
    pub distribution: PathBuf,
    /// Apply the configured smoothing before drawing.
    #[arg(long)]
    pub smooth: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Run directory whose manifest supplies schedule and config.
    #[arg(long, conflicts_with_all = ["schedule", "config"], required_unless_present = "schedule")]
    pub run: Option<PathBuf>,
    /// Schedule file (ASCH), used with `--config`.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Replay on softmax regression even if the source used a hidden layer.
    #[arg(long, conflicts_with = "hidden_dim")]
    pub softmax: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Finished run directory.
    #[arg(long)]
    pub run: PathBuf,
    /// Number of id segments in histograms; must divide the dataset size.
    #[arg(long)]
    pub segments: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Comma-separated seeds, at least two.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// Which part of H* the STATIC distribution is estimated from.
    #[arg(long, value_enum, default_value_t = StaticSource::FullRun)]
    pub static_source: StaticSource,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Process exit code for an error: 1 for configuration problems, 2 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::InvalidParam { .. } => 1,
        _ => 2,
    }
}

/// Dispatches a parsed command line.
pub fn run(cli: Cli) -> Result<ExperimentManifest> {
    match cli.command {
        Command::Search(a) => cmd_search(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Static(a) => cmd_static(&a),
        Command::Replay(a) => cmd_replay(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Dataset(a) => cmd_dataset(&a),
    }
}

/// Applies the output-root override to a relative directory.
pub fn resolve_output(out: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if out.is_relative() && !root.is_empty() => PathBuf::from(root).join(out),
        _ => out.to_path_buf(),
    }
}

/// `<id>_<condition>_s<seed>_<table>.csv`
pub fn csv_name(id: &str, condition: Option<Condition>, seed: u64, table: &str) -> String {
    let cond = condition.map_or_else(|| "ALL".to_string(), |c| c.to_string());
    format!("{id}_{cond}_s{seed}_{table}.csv")
}

/// Largest divisor of `n` that is at most 100.
pub fn default_segments(n: usize) -> usize {
    (1..=n.min(100)).rev().find(|&k| n.is_multiple_of(k)).unwrap_or(1)
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    args.overrides.apply(&mut cfg.search);
    cfg.validate()?;
    Ok(cfg.with_absolute_paths())
}

struct RunDir {
    path: PathBuf,
    manifest: ExperimentManifest,
    start: Instant,
}

impl RunDir {
    fn open(out: &OutputArgs, command: &str, condition: Option<Condition>, config: &ExperimentConfig) -> Result<Self> {
        let path = resolve_output(&out.out);
        if path.join(MANIFEST_FILE).exists() && !out.force {
            return Err(Error::Config(format!("{} already holds a run; pass --force to overwrite", path.display())));
        }
        std::fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        let id = out.id.clone().unwrap_or_else(|| {
            path.file_name().map_or_else(|| "run".to_string(), |n| n.to_string_lossy().into_owned())
        });
        let manifest = ExperimentManifest::new(command, &id, condition, config);
        let mut dir = RunDir { path, manifest, start: Instant::now() };
        let text = config.to_toml();
        dir.artifact("config", "config.toml", |p| std::fs::write(p, &text).map_err(|e| Error::io(p, e)))?;
        Ok(dir)
    }

    fn artifact(&mut self, name: &str, file: &str, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        f(&self.path.join(file))?;
        self.manifest.artifacts.insert(name.to_string(), PathBuf::from(file));
        Ok(())
    }

    fn csv(&self, table: &str) -> String {
        csv_name(&self.manifest.experiment_id, self.manifest.condition, self.manifest.seed, table)
    }

    fn lap(&mut self, stage: &str, since: Instant) {
        self.manifest.timings_ms.insert(stage.to_string(), since.elapsed().as_millis() as u64);
    }

    fn finish(mut self) -> Result<ExperimentManifest> {
        self.manifest.timings_ms.insert("total".into(), self.start.elapsed().as_millis() as u64);
        let path = self.path.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(self.manifest)
    }

    fn save_schedule_outputs(&mut self, schedule: &SamplingSchedule) -> Result<()> {
        self.artifact("schedule", "schedule.bin", |p| format::save_schedule(schedule, p))?;
        let counts = self.csv("counts");
        self.artifact("counts_csv", &counts, |p| format::write_counts_csv(schedule, p))
    }

    fn save_model(&mut self, model: &ModelState, eval: &EvalResult) -> Result<()> {
        self.artifact("model", "model.bin", |p| format::save_model(model, p))?;
        self.manifest.record_eval("final_", eval);
        Ok(())
    }
}

fn timed<T>(dir: &mut RunDir, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let t = Instant::now();
    let out = f();
    dir.lap(stage, t);
    out
}

pub fn cmd_search(args: &SearchArgs) -> Result<ExperimentManifest> {
    let cfg = load_config(&args.config)?;
    let mut dir = RunDir::open(&args.output, "search", Some(Condition::Dynamic), &cfg)?;
    let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
    let outcome = timed(&mut dir, "search", || run_autosampling(&cfg.search, &data))?;

    dir.save_schedule_outputs(&outcome.schedule)?;
    dir.artifact("distribution", "distribution.bin", |p| format::save_distribution(&outcome.distribution, p))?;
    let dist_csv = dir.csv("distribution");
    dir.artifact("distribution_csv", &dist_csv, |p| format::write_distribution_csv(&outcome.distribution, p))?;
    let smoothed = static_distribution(&outcome.schedule, StaticSource::FullRun, cfg.search.smoothing)?;
    dir.artifact("static_distribution", "static_distribution.bin", |p| format::save_distribution(&smoothed, p))?;
    let log_text = outcome.log.to_text(true);
    dir.artifact("run_log", "run_log.txt", |p| std::fs::write(p, &log_text).map_err(|e| Error::io(p, e)))?;
    dir.save_model(&outcome.model, &outcome.final_eval)?;
    dir.manifest.metrics.insert("num_batches".into(), outcome.schedule.num_batches() as f64);
    dir.manifest.metrics.insert("num_samples".into(), outcome.schedule.num_samples() as f64);
    dir.finish()
}

pub fn cmd_baseline(args: &SearchArgs) -> Result<ExperimentManifest> {
    let cfg = load_config(&args.config)?;
    let mut dir = RunDir::open(&args.output, "baseline", Some(Condition::Uniform), &cfg)?;
    let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
    let arch = cfg.search.architecture(data.feature_dim(), data.num_classes());
    let schedule = uniform_run_schedule(&cfg.search, data.num_samples())?;
    let (model, eval) =
        timed(&mut dir, "train", || replay_run(&schedule, arch, &cfg.search.trainer, &data, cfg.search.seed))?;
    dir.save_schedule_outputs(&schedule)?;
    dir.save_model(&model, &eval)?;
    dir.manifest.metrics.insert("num_samples".into(), schedule.num_samples() as f64);
    dir.finish()
}

pub fn cmd_static(args: &StaticArgs) -> Result<ExperimentManifest> {
    let cfg = load_config(&args.config)?;
    let mut p = format::load_distribution(&args.distribution)?;
    if args.smooth {
        p = smooth_distribution(&p, cfg.search.smoothing)?;
    }
    let mut dir = RunDir::open(&args.output, "static", Some(Condition::Static), &cfg)?;
    dir.manifest.inputs.insert("distribution".into(), absolute(&args.distribution));
    let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
    check_len(&p, &data)?;
    let arch = cfg.search.architecture(data.feature_dim(), data.num_classes());
    let mut rng = RngStream::for_domain(cfg.search.seed, Domain::Static, 0, 0);
    let schedule = make_static_schedule(&p, cfg.search.total_batches(), cfg.search.batch_size, &mut rng)?;
    let (model, eval) =
        timed(&mut dir, "train", || replay_run(&schedule, arch, &cfg.search.trainer, &data, cfg.search.seed))?;
    dir.artifact("distribution", "distribution.bin", |path| format::save_distribution(&p, path))?;
    dir.save_schedule_outputs(&schedule)?;
    dir.save_model(&model, &eval)?;
    dir.manifest.metrics.insert("num_samples".into(), schedule.num_samples() as f64);
    dir.finish()
}

fn check_len(p: &SamplingDistribution, data: &Dataset) -> Result<()> {
    if p.len() != data.num_samples() {
        return Err(Error::Dimension(format!(
            "distribution covers {} samples, dataset has {}",
            p.len(),
            data.num_samples()
        )));
    }
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Replays a schedule. With `--run` the source manifest supplies config and
/// schedule, and the reproduced metrics are compared with the recorded ones.
pub fn cmd_replay(args: &ReplayArgs) -> Result<ExperimentManifest> {
    let (mut cfg, schedule_path, source) = match &args.run {
        Some(run) => {
            let m = ExperimentManifest::load(run)?;
            let path = m.artifact(run, "schedule")?;
            let mut cfg = m.config.clone();
            args.config.overrides.apply(&mut cfg.search);
            (cfg, path, Some((run.clone(), m)))
        }
        None => {
            let path = args.schedule.clone().expect("clap requires --schedule without --run");
            (load_config(&args.config)?, path, None)
        }
    };
    if args.softmax {
        cfg.search.hidden_dim = None;
    }
    cfg.validate()?;

    let condition = source.as_ref().and_then(|(_, m)| m.condition).or(Some(Condition::Dynamic));
    let mut dir = RunDir::open(&args.output, "replay", condition, &cfg)?;
    dir.manifest.inputs.insert("schedule".into(), absolute(&schedule_path));
    let schedule = format::load_schedule(&schedule_path)?;
    let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
    let arch = cfg.search.architecture(data.feature_dim(), data.num_classes());
    let (model, eval) =
        timed(&mut dir, "train", || replay_run(&schedule, arch, &cfg.search.trainer, &data, cfg.search.seed))?;
    dir.save_model(&model, &eval)?;

    if let Some((run, m)) = source {
        dir.manifest.inputs.insert("run".into(), absolute(&run));
        if let Some(&recorded) = m.metrics.get("final_metric") {
            dir.manifest.metrics.insert("recorded_final_metric".into(), recorded);
            let same = recorded.to_bits() == eval.metric.to_bits();
            dir.manifest.metrics.insert("metric_reproduced".into(), f64::from(u8::from(same)));
        }
        if let Ok(path) = m.artifact(&run, "model") {
            let recorded = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let same = recorded == format::encode_model(&model);
            dir.manifest.metrics.insert("weights_identical".into(), f64::from(u8::from(same)));
        }
    }
    dir.finish()
}

/// Exports analysis tables for a finished run.
///
/// Schedules yield a whole-run segment histogram, one histogram per
/// alternation (all ordered by the last alternation's counts) and the
/// frequency/loss table of the final model. Comparison runs yield their
/// condition table.
pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<ExperimentManifest> {
    let src = ExperimentManifest::load(&args.run)?;
    let cfg = src.config.clone();
    let mut out = args.output.clone();
    if out.id.is_none() {
        out.id = Some(src.experiment_id.clone());
    }
    let mut dir = RunDir::open(&out, "analyze", src.condition, &cfg)?;
    dir.manifest.inputs.insert("run".into(), absolute(&args.run));

    if src.artifacts.contains_key("comparison") {
        let path = src.artifact(&args.run, "comparison")?;
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let table: ComparisonTable = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { offset: 0, message: format!("{}: {e}", path.display()) })?;
        let name = dir.csv("comparison");
        dir.artifact("comparison_csv", &name, |p| table.write_csv(p))?;
    }

    if src.artifacts.contains_key("schedule") {
        let schedule = format::load_schedule(&src.artifact(&args.run, "schedule")?)?;
        let n = schedule.dataset_size();
        let k = args.segments.unwrap_or_else(|| default_segments(n));
        let whole = segment_histogram(&schedule, n, k)?;

        let mut alternations: Vec<u32> = schedule
            .provenance()
            .iter()
            .filter_map(|p| match p {
                Provenance::Alternation(a) => Some(*a),
                _ => None,
            })
            .collect();
        alternations.dedup();
        let per_alt = alternations
            .iter()
            .map(|&a| Ok((a, segment_histogram(&schedule.alternation(a), n, k)?)))
            .collect::<Result<Vec<_>>>()?;
        let reference = per_alt.last().map_or_else(|| whole.clone(), |(_, h)| h.clone());

        let name = dir.csv("segments");
        let whole = whole.ordered_like(&reference);
        dir.artifact("segments_csv", &name, |p| whole.write_csv(p))?;
        dir.manifest.metrics.insert("histogram_total".into(), whole.total() as f64);
        for (a, h) in per_alt {
            let name = dir.csv(&format!("segments_alt{a}"));
            let h = h.ordered_like(&reference);
            dir.artifact(&format!("segments_alt{a}_csv"), &name, |p| h.write_csv(p))?;
        }

        if src.artifacts.contains_key("model") {
            let model = format::load_model(&src.artifact(&args.run, "model")?)?;
            let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
            let losses = per_sample_losses(&model, &data)?;
            let table = frequency_loss_table(&schedule, &losses)?;
            let name = dir.csv("freq_loss");
            dir.artifact("freq_loss_csv", &name, |p| table.write_csv(p))?;
            if let Some(r) = table.correlation {
                dir.manifest.metrics.insert("freq_loss_pearson".into(), r);
            }
            log::info!("frequency/loss Pearson correlation: {}", table.correlation_label());
        }
    }

    if dir.manifest.artifacts.len() == 1 {
        return Err(Error::Config(format!("{} has nothing to analyse", args.run.display())));
    }
    dir.finish()
}

pub fn cmd_compare(args: &CompareArgs) -> Result<ExperimentManifest> {
    let cfg = load_config(&args.config)?;
    let mut dir = RunDir::open(&args.output, "compare", None, &cfg)?;
    let data = timed(&mut dir, "load_dataset", || cfg.load_dataset())?;
    let table =
        timed(&mut dir, "compare", || compare_conditions_with(&cfg.search, &data, &args.seeds, args.static_source))?;
    let json = serde_json::to_string_pretty(&table).expect("table serializes");
    dir.artifact("comparison", "comparison.json", |p| std::fs::write(p, &json).map_err(|e| Error::io(p, e)))?;
    let name = dir.csv("comparison");
    dir.artifact("comparison_csv", &name, |p| table.write_csv(p))?;
    for row in &table.rows {
        dir.manifest.metrics.insert(format!("{}_mean", row.condition), row.mean);
        dir.manifest.metrics.insert(format!("{}_std", row.condition), row.std);
    }
    dir.finish()
}

/// Writes `train.csv` and `val.csv` for the configured dataset.
pub fn cmd_dataset(args: &SearchArgs) -> Result<ExperimentManifest> {
    let cfg = load_config(&args.config)?;
    let mut dir = RunDir::open(&args.output, "dataset", None, &cfg)?;
    let data = cfg.load_dataset()?;
    let (train, val) = (dir.path.join("train.csv"), dir.path.join("val.csv"));
    data.write_csv(&train, &val)?;
    dir.manifest.artifacts.insert("train".into(), "train.csv".into());
    dir.manifest.artifacts.insert("val".into(), "val.csv".into());
    dir.manifest.metrics.insert("num_train".into(), data.num_samples() as f64);
    dir.manifest.metrics.insert("num_val".into(), data.num_val() as f64);
    dir.finish()
}
