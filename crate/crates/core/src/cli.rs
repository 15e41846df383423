//! The `vidmem` command line.
//!
//! Settings resolve as flags, then the `--config` JSON file, then defaults;
//! the worker count additionally falls back to `VIDMEM_WORKERS`. Every report
//! carries `format_version` and the fully resolved config, and is written
//! atomically only after all work has succeeded.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 internal error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::audit::{
    audit_content, audit_motion, detect, join_labels, load_embeddings, load_flows,
    load_trajectories, record_scores, Signal, DEFAULT_BLOCK,
};
use crate::dedup::{
    curate_prompts, duplication_counts, topk_neighbors, DuplicationItem, FeatureIndex,
    PromptDataset,
};
use crate::detection::{AggregationStrategy, StepMagnitude};
use crate::error::Error;
use crate::eval::{
    evaluate, summarize, AuditConfig, AuditRecord, AuditSummary, Evaluation, Scored, ScoredSet,
};
use crate::io::{
    load_manifest, load_trajectory, read_labels, read_scores, write_atomic, DatasetManifest,
    LatentTrajectory,
};
use crate::motion::NmfConfig;
use crate::synth::{
    generate_content_fixture, generate_feature_fixture, generate_latent_fixture,
    generate_motion_fixture, FixtureSpec,
};

pub const FORMAT_VERSION: u32 = 1;
pub const WORKERS_ENV: &str = "VIDMEM_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "vidmem",
    version,
    about = "Memorization audits for video diffusion models"
)]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads [default: $VIDMEM_WORKERS, else all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frame-level content memorization (GSSCD) against a training set.
    AuditContent(AuditContentArgs),
    /// Flow-level motion memorization (OFS-k) against a training set.
    AuditMotion(AuditMotionArgs),
    /// Inference-time signals from conditional/unconditional predictions.
    Detect(DetectArgs),
    /// Near-duplicate counts and a duplication-ranked prompt set.
    Dedup(DedupArgs),
    /// AUC and F1 of an id,score,label CSV.
    Evaluate(EvaluateArgs),
    /// Write a synthetic fixture with planted memorization.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct AuditContentArgs {
    /// Manifest of generated videos (embedding_path per entry).
    #[arg(long)]
    pub gen: PathBuf,
    /// Manifest of training videos.
    #[arg(long)]
    pub train: PathBuf,
    /// id,label CSV; adds AUC and F1 to the report.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// [default: 0.4]
    #[arg(long, allow_negative_numbers = true)]
    pub gsscd_threshold: Option<f64>,
    /// Training frames per similarity tile [default: 1024].
    #[arg(long)]
    pub block_cols: Option<usize>,
    /// Report path [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditMotionArgs {
    /// Manifest of generated videos (flow_path per entry).
    #[arg(long)]
    pub gen: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// [default: 0.5]
    #[arg(long, allow_negative_numbers = true)]
    pub ofs_threshold: Option<f64>,
    /// Window length in flows [default: 3].
    #[arg(long)]
    pub k: Option<usize>,
    /// Score every window, including panning and static flows.
    #[arg(long)]
    pub no_nmf: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    First,
    FirstN,
    #[default]
    All,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Trajectory directories (step_XXXX_cond.vmt / step_XXXX_uncond.vmt).
    pub dirs: Vec<PathBuf>,
    /// Manifest with a latent_dir per entry, instead of DIRS.
    #[arg(long, conflicts_with = "dirs")]
    pub trajectories: Option<PathBuf>,
    /// [default: all]
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyName>,
    /// Steps averaged by --strategy first-n.
    #[arg(long)]
    pub n: Option<usize>,
    /// Flag trajectories whose content signal reaches this value.
    #[arg(long)]
    pub content_threshold: Option<f64>,
    /// Flag trajectories whose motion signal reaches this value.
    #[arg(long)]
    pub motion_threshold: Option<f64>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Manifest with a feature_path and caption per entry.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub features: Option<PathBuf>,
    /// One [N, D] feature matrix, with --ids.
    #[arg(long, requires = "ids")]
    pub matrix: Option<PathBuf>,
    /// id,caption CSV for the rows of --matrix.
    #[arg(long, requires = "matrix")]
    pub ids: Option<PathBuf>,
    /// Neighbors kept per item [default: 50].
    #[arg(long)]
    pub k: Option<usize>,
    /// Duplicate similarity threshold [default: 0.95].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Maximum prompts [default: 500].
    #[arg(long)]
    pub limit: Option<usize>,
    /// [default: 1024]
    #[arg(long)]
    pub block_rows: Option<usize>,
    /// [default: 1024]
    #[arg(long)]
    pub block_cols: Option<usize>,
    /// Prompt CSV (caption,source_video_id).
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with header id,score,label.
    pub scores: PathBuf,
    /// Also report F1 at this threshold.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Content,
    Motion,
    Latent,
    Features,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: FixtureKind,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// FixtureSpec JSON; defaults depend on the kind.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Detection settings of the config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSettings {
    pub strategy: StrategyName,
    pub n: Option<usize>,
    pub content_threshold: Option<f64>,
    pub motion_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupSettings {
    pub k: usize,
    pub tau: f64,
    pub limit: usize,
}

impl Default for DedupSettings {
    fn default() -> Self {
        Self {
            k: 50,
            tau: 0.95,
            limit: 500,
        }
    }
}

/// The `--config` file. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub block_rows: Option<usize>,
    pub block_cols: Option<usize>,
    pub audit: AuditConfig,
    pub nmf: NmfConfig,
    pub detect: DetectSettings,
    pub dedup: DedupSettings,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let outcome = std::panic::catch_unwind(|| execute(&cli)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(CliError::Internal(msg))
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("vidmem: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command on a worker pool sized per the resolved config.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    let workers = resolve_workers(cli.workers, file.workers, std::env::var(WORKERS_ENV).ok())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::AuditContent(a) => cmd_audit_content(a, &file, workers),
        Command::AuditMotion(a) => cmd_audit_motion(a, &file, workers),
        Command::Detect(a) => cmd_detect(a, &file, workers),
        Command::Dedup(a) => cmd_dedup(a, &file, workers),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    })
}

pub fn read_config(path: &Path) -> CliResult<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Flag, then config file, then the environment value, then all cores.
pub fn resolve_workers(
    flag: Option<usize>,
    file: Option<usize>,
    env: Option<String>,
) -> CliResult<usize> {
    let env =
        match env {
            Some(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::Config(format!("{WORKERS_ENV}={v:?} is not a worker count"))
            })?),
            None => None,
        };
    let w = flag
        .or(file)
        .or(env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if w == 0 {
        return Err(CliError::Config("workers must be at least 1".into()));
    }
    Ok(w)
}

#[derive(Serialize)]
struct Report<'a, C: Serialize, B: Serialize> {
    format_version: u32,
    command: &'a str,
    config: C,
    #[serde(flatten)]
    body: B,
}

fn emit<C: Serialize, B: Serialize>(
    out: Option<&Path>,
    command: &str,
    config: C,
    body: B,
) -> CliResult<()> {
    let report = Report {
        format_version: FORMAT_VERSION,
        command,
        config,
        body,
    };
    let mut bytes =
        serde_json::to_vec_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    match out {
        Some(p) => write_atomic(p, &bytes).map_err(CliError::from),
        None => {
            use std::io::Write;
            match std::io::stdout().write_all(&bytes) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::Internal(format!("stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn manifest(path: &Path) -> CliResult<DatasetManifest> {
    let m = load_manifest(path)?;
    if m.is_empty() {
        return Err(CliError::Data(format!(
            "{}: manifest has no entries",
            path.display()
        )));
    }
    Ok(m)
}

fn positive(name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be at least 1")));
    }
    Ok(v)
}

fn labelled(
    labels: Option<&Path>,
    scores: Vec<(&str, f64)>,
    threshold: Option<f64>,
) -> CliResult<Option<Evaluation>> {
    let Some(path) = labels else { return Ok(None) };
    let lf = read_labels(path)?;
    Ok(Some(evaluate(&join_labels(scores, &lf)?, threshold)?))
}

#[derive(Serialize)]
struct AuditReportConfig<'a> {
    gen_manifest: &'a Path,
    train_manifest: &'a Path,
    labels: Option<&'a Path>,
    audit: AuditConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    nmf: Option<NmfConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    block_cols: Option<usize>,
    workers: usize,
}

#[derive(Serialize)]
struct AuditBody<'a> {
    summary: AuditSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<Evaluation>,
    records: &'a [AuditRecord],
}

fn cmd_audit_content(a: &AuditContentArgs, file: &FileConfig, workers: usize) -> CliResult<()> {
    let mut cfg = file.audit;
    if let Some(t) = a.gsscd_threshold {
        cfg.gsscd_threshold = t;
    }
    cfg.validate()?;
    let block = positive(
        "block-cols",
        a.block_cols.or(file.block_cols).unwrap_or(DEFAULT_BLOCK),
    )?;

    let gen = load_embeddings(&manifest(&a.gen)?)?;
    let train = load_embeddings(&manifest(&a.train)?)?;
    let records = audit_content(&gen, &train, &cfg, block)?;
    let summary = summarize(&records, &cfg)?;
    let evaluation = labelled(
        a.labels.as_deref(),
        record_scores(&records, Signal::Content),
        Some(cfg.gsscd_threshold),
    )?;
    emit(
        a.out.as_deref(),
        "audit-content",
        AuditReportConfig {
            gen_manifest: &a.gen,
            train_manifest: &a.train,
            labels: a.labels.as_deref(),
            audit: cfg,
            nmf: None,
            block_cols: Some(block),
            workers,
        },
        AuditBody {
            summary,
            evaluation,
            records: &records,
        },
    )
}

fn cmd_audit_motion(a: &AuditMotionArgs, file: &FileConfig, workers: usize) -> CliResult<()> {
    let mut cfg = file.audit;
    if let Some(t) = a.ofs_threshold {
        cfg.ofs_threshold = t;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if a.no_nmf {
        cfg.nmf_enabled = false;
    }
    cfg.validate()?;
    file.nmf.validate()?;

    let gen = load_flows(&manifest(&a.gen)?)?;
    let train = load_flows(&manifest(&a.train)?)?;
    let records = audit_motion(&gen, &train, &cfg, &file.nmf)?;
    let summary = summarize(&records, &cfg)?;
    let evaluation = labelled(
        a.labels.as_deref(),
        record_scores(&records, Signal::Motion),
        Some(cfg.ofs_threshold),
    )?;
    emit(
        a.out.as_deref(),
        "audit-motion",
        AuditReportConfig {
            gen_manifest: &a.gen,
            train_manifest: &a.train,
            labels: a.labels.as_deref(),
            audit: cfg,
            nmf: Some(file.nmf),
            block_cols: None,
            workers,
        },
        AuditBody {
            summary,
            evaluation,
            records: &records,
        },
    )
}

#[derive(Serialize)]
struct DetectReportConfig<'a> {
    trajectories: Option<&'a Path>,
    dirs: &'a [PathBuf],
    strategy: AggregationStrategy,
    content_threshold: Option<f64>,
    motion_threshold: Option<f64>,
    labels: Option<&'a Path>,
    workers: usize,
}

#[derive(Serialize)]
struct DetectRecord {
    trajectory_id: String,
    content_signal: f64,
    motion_signal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    content_memorized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    motion_memorized: Option<bool>,
    steps_used: usize,
    wall_time_ms: f64,
    steps: Vec<StepMagnitude>,
}

#[derive(Serialize)]
struct DetectEvaluation {
    content: Evaluation,
    motion: Evaluation,
}

#[derive(Serialize)]
struct DetectBody {
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    evaluation: Option<DetectEvaluation>,
    records: Vec<DetectRecord>,
}

fn resolve_strategy(name: StrategyName, n: Option<usize>) -> CliResult<AggregationStrategy> {
    Ok(match name {
        StrategyName::First => AggregationStrategy::FirstStep,
        StrategyName::All => AggregationStrategy::AllSteps,
        StrategyName::FirstN => AggregationStrategy::FirstN(positive(
            "n",
            n.ok_or_else(|| CliError::Config("--strategy first-n needs --n".into()))?,
        )?),
    })
}

fn cmd_detect(a: &DetectArgs, file: &FileConfig, workers: usize) -> CliResult<()> {
    let d = file.detect;
    let strategy = resolve_strategy(a.strategy.unwrap_or(d.strategy), a.n.or(d.n))?;
    let content_threshold = a.content_threshold.or(d.content_threshold);
    let motion_threshold = a.motion_threshold.or(d.motion_threshold);

    let trajs: Vec<LatentTrajectory> = match &a.trajectories {
        Some(p) => load_trajectories(&manifest(p)?)?,
        None if a.dirs.is_empty() => {
            return Err(CliError::Config(
                "give trajectory directories or --trajectories".into(),
            ))
        }
        None => a
            .dirs
            .iter()
            .map(load_trajectory)
            .collect::<Result<_, _>>()?,
    };

    let mut records = Vec::with_capacity(trajs.len());
    for t in &trajs {
        let start = Instant::now();
        let (series, (c, m)) = detect(t, strategy)?;
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        records.push(DetectRecord {
            trajectory_id: t.trajectory_id().to_string(),
            content_signal: c,
            motion_signal: m,
            content_memorized: content_threshold.map(|th| c >= th),
            motion_memorized: motion_threshold.map(|th| m >= th),
            steps_used: series.steps.len(),
            wall_time_ms,
            steps: series.steps,
        });
    }

    let evaluation = match a.labels.as_deref() {
        Some(path) => {
            let lf = read_labels(path)?;
            let set = |sig: fn(&DetectRecord) -> f64| -> CliResult<ScoredSet> {
                Ok(join_labels(
                    records.iter().map(|r| (r.trajectory_id.as_str(), sig(r))),
                    &lf,
                )?)
            };
            Some(DetectEvaluation {
                content: evaluate(&set(|r| r.content_signal)?, content_threshold)?,
                motion: evaluate(&set(|r| r.motion_signal)?, motion_threshold)?,
            })
        }
        None => None,
    };
    emit(
        a.out.as_deref(),
        "detect",
        DetectReportConfig {
            trajectories: a.trajectories.as_deref(),
            dirs: &a.dirs,
            strategy,
            content_threshold,
            motion_threshold,
            labels: a.labels.as_deref(),
            workers,
        },
        DetectBody {
            n: records.len(),
            evaluation,
            records,
        },
    )
}

#[derive(Serialize)]
struct DedupReportConfig<'a> {
    features: Option<&'a Path>,
    matrix: Option<&'a Path>,
    ids: Option<&'a Path>,
    k: usize,
    tau: f64,
    limit: usize,
    block_rows: usize,
    block_cols: usize,
    prompts: Option<&'a Path>,
    workers: usize,
}

#[derive(Serialize)]
struct PromptSummary<'a> {
    count: usize,
    limit: usize,
    shortfall: usize,
    entries: &'a PromptDataset,
}

#[derive(Serialize)]
struct DedupBody<'a> {
    n: usize,
    clipped_items: usize,
    prompts: PromptSummary<'a>,
    items: &'a [DuplicationItem],
}

fn cmd_dedup(a: &DedupArgs, file: &FileConfig, workers: usize) -> CliResult<()> {
    let d = file.dedup;
    let k = a.k.unwrap_or(d.k);
    let tau = a.tau.unwrap_or(d.tau);
    let limit = positive("limit", a.limit.unwrap_or(d.limit))?;
    let block_rows = positive(
        "block-rows",
        a.block_rows.or(file.block_rows).unwrap_or(DEFAULT_BLOCK),
    )?;
    let block_cols = positive(
        "block-cols",
        a.block_cols.or(file.block_cols).unwrap_or(DEFAULT_BLOCK),
    )?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(CliError::Config(format!("tau = {tau} outside (0, 1]")));
    }
    if k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }

    let index = match (&a.features, &a.matrix, &a.ids) {
        (Some(f), _, _) => FeatureIndex::from_manifest(&manifest(f)?)?,
        (None, Some(m), Some(ids)) => FeatureIndex::from_matrix(m, ids)?,
        _ => {
            return Err(CliError::Config(
                "give --features or --matrix with --ids".into(),
            ))
        }
    };
    let lists = topk_neighbors(&index, k, block_rows, block_cols)?;
    let report = duplication_counts(&index, &lists, tau)?;
    let prompts = curate_prompts(&index, &report, limit)?;
    if prompts.shortfall() > 0 {
        log::warn!(
            "only {} unique captions for a limit of {limit}",
            prompts.entries.len()
        );
    }
    if let Some(p) = &a.prompts {
        prompts.write_csv(p)?;
    }
    emit(
        a.out.as_deref(),
        "dedup",
        DedupReportConfig {
            features: a.features.as_deref(),
            matrix: a.matrix.as_deref(),
            ids: a.ids.as_deref(),
            k,
            tau,
            limit,
            block_rows,
            block_cols,
            prompts: a.prompts.as_deref(),
            workers,
        },
        DedupBody {
            n: index.len(),
            clipped_items: report.clipped_items(),
            prompts: PromptSummary {
                count: prompts.entries.len(),
                limit,
                shortfall: prompts.shortfall(),
                entries: &prompts,
            },
            items: &report.items,
        },
    )
}

#[derive(Serialize)]
struct EvaluateConfig<'a> {
    scores: &'a Path,
    threshold: Option<f64>,
}

fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let rows = read_scores(&a.scores)?;
    let set = ScoredSet::new(
        rows.into_iter()
            .map(|r| Scored {
                id: r.id,
                score: r.score,
                label: r.label,
            })
            .collect(),
    )?;
    let evaluation = evaluate(&set, a.threshold)?;
    emit(
        a.out.as_deref(),
        "evaluate",
        EvaluateConfig {
            scores: &a.scores,
            threshold: a.threshold,
        },
        evaluation,
    )
}

#[derive(Serialize)]
struct SynthBody<'a> {
    kind: FixtureKind,
    out: &'a Path,
    train_manifest: Option<PathBuf>,
    gen_manifest: PathBuf,
    labels: Option<PathBuf>,
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<FixtureSpec>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => match a.kind {
            FixtureKind::Content => FixtureSpec::content_default(0),
            FixtureKind::Motion => FixtureSpec::motion_default(0),
            FixtureKind::Latent => FixtureSpec::latent_default(0),
            FixtureKind::Features => FixtureSpec::features_default(0),
        },
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let files = match a.kind {
        FixtureKind::Content => generate_content_fixture(&spec, &a.out),
        FixtureKind::Motion => generate_motion_fixture(&spec, &a.out),
        FixtureKind::Latent => generate_latent_fixture(&spec, &a.out),
        FixtureKind::Features => generate_feature_fixture(&spec, &a.out),
    }?;
    let mut spec_bytes =
        serde_json::to_vec_pretty(&spec).map_err(|e| CliError::Internal(e.to_string()))?;
    spec_bytes.push(b'\n');
    write_atomic(a.out.join("spec.json"), &spec_bytes)?;
    emit(
        None,
        "synth",
        &spec,
        SynthBody {
            kind: a.kind,
            out: &a.out,
            train_manifest: files.train_manifest,
            gen_manifest: files.gen_manifest,
            labels: files.labels,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worker_precedence() {
        assert_eq!(
            resolve_workers(Some(2), Some(3), Some("4".into())).unwrap(),
            2
        );
        assert_eq!(resolve_workers(None, Some(3), Some("4".into())).unwrap(), 3);
        assert_eq!(resolve_workers(None, None, Some("4".into())).unwrap(), 4);
        assert!(resolve_workers(None, None, None).unwrap() >= 1);
        assert!(matches!(
            resolve_workers(None, None, Some("x".into())),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            resolve_workers(Some(0), None, None),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"audit": {"k": 4}}"#).is_ok());
        assert!(serde_json::from_str::<FileConfig>(r#"{"threshold": 1}"#).is_err());
        assert!(serde_json::from_str::<FileConfig>(r#"{"audit": {"kk": 4}}"#).is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let f: FileConfig = serde_json::from_str(
            r#"{"audit": {"k": 4}, "detect": {"strategy": "first-n", "n": 10}}"#,
        )
        .unwrap();
        assert_eq!(f.audit.k, 4);
        assert_eq!(f.audit.gsscd_threshold, 0.4);
        assert_eq!(
            resolve_strategy(f.detect.strategy, f.detect.n).unwrap(),
            AggregationStrategy::FirstN(10)
        );
        assert!(resolve_strategy(StrategyName::FirstN, None).is_err());
    }
}
