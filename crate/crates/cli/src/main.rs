//! `forge`: build, validate, audit and schedule MCQA datasets.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "forge",
    version,
    about = "MCQA dataset construction and shortcut audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic base dataset (fixture generator).
    Synth(SynthArgs),
    /// Build an MCQA dataset from a base dataset.
    Generate(GenerateArgs),
    /// Check a base or MCQA dataset and emit a validation report.
    Validate(ValidateArgs),
    /// Run plain, shuffled and blind evaluations against a backend.
    Audit(AuditArgs),
    /// Emit a per-step option-dropping manifest for a trainer.
    Schedule(ScheduleArgs),
    /// Serve the human-review API.
    ReviewServe(ReviewServeArgs),
    /// Compare two audit reports.
    Diff(DiffArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    /// Fraction of samples whose target agent is hidden.
    #[arg(long, default_value_t = 0.188)]
    not_visible_rate: f64,
    #[arg(long, default_value_t = 0.03)]
    test_fraction: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Remote endpoint overrides; unset fields fall back to `forge.toml`, then defaults.
#[derive(Debug, Args, Default)]
struct EndpointArgs {
    /// Config file; defaults to `forge.toml` beside the input dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    endpoint_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable that holds the API key.
    #[arg(long)]
    key_env: Option<String>,
    #[arg(long)]
    supports_video: Option<bool>,
    #[arg(long, value_enum)]
    blind_input: Option<BlindInputArg>,
    #[arg(long)]
    retries: Option<u32>,
    #[arg(long)]
    backoff_ms: Option<u64>,
    #[arg(long)]
    endpoint_parallel: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BlindInputArg {
    Omit,
    ZeroFrame,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Base dataset. Visibility relabeling is applied on load.
    #[arg(long)]
    base: PathBuf,
    /// `llm` or `debiased`.
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long)]
    seed: u64,
    /// `template`, `styled[:marker]` or `http`.
    #[arg(long, default_value = "template")]
    expert: String,
    /// Reuse Stage I outputs from an earlier run instead of recomputing them.
    #[arg(long)]
    from_stage1: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    max_parallel: usize,
    #[arg(long, default_value_t = 0.10)]
    max_failure_rate: f64,
    /// Condition remote distractor generation on the clip when supported.
    #[arg(long)]
    condition_on_video: bool,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Defaults to `<dataset>.validation.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScoringArg {
    All,
    Mean,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `oracle`, `fixed:J`, `longest`, `marker:TEXT`, `random[:SEED]`, `absence-default[:SEED]` or `http`.
    #[arg(long)]
    backend: String,
    /// Run the plain and shuffled evaluations without the clip as well.
    #[arg(long)]
    blind: bool,
    #[arg(long, default_value_t = 4)]
    shuffle: usize,
    #[arg(long, value_enum, default_value = "all")]
    shuffle_scoring: ScoringArg,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
    /// Defaults to the dataset file stem.
    #[arg(long)]
    dataset_id: Option<String>,
    #[command(flatten)]
    endpoint: EndpointArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormulaArg {
    Interpolated,
    AsWritten,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    dmin: f64,
    #[arg(long, default_value_t = 100.0)]
    dmax: f64,
    #[arg(long, default_value_t = 670)]
    tau: u64,
    #[arg(long, default_value_t = 2500)]
    steps: u64,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value = "interpolated")]
    formula: FormulaArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReviewServeArgs {
    /// `id=path`, repeatable.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<String>,
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: std::net::SocketAddr,
}

#[derive(Debug, Args)]
struct DiffArgs {
    /// Baseline report.
    #[arg(long)]
    a: PathBuf,
    /// Candidate report.
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure reported to the caller as a JSON envelope on stderr.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub report: Option<PathBuf>,
}

impl Failure {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            message: message.into(),
            report: None,
        }
    }

    pub fn with_report(mut self, path: &std::path::Path) -> Self {
        self.report = Some(path.to_path_buf());
        self
    }
}

impl From<forge_core::Error> for Failure {
    fn from(e: forge_core::Error) -> Self {
        Failure::new(e.kind(), e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<forge_core::Error>() {
            Ok(core) => core.into(),
            Err(other) => Failure::new("error", format!("{other:#}")),
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("FORGE_LOG")
                .unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Generate(a) => commands::generate(a),
        Command::Validate(a) => commands::validate(a),
        Command::Audit(a) => commands::audit(a),
        Command::Schedule(a) => commands::schedule(a),
        Command::ReviewServe(a) => commands::review_serve(a),
        Command::Diff(a) => commands::diff(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let mut error = serde_json::json!({"kind": f.kind, "message": f.message});
            if let Some(path) = &f.report {
                error["report"] = path.display().to_string().into();
            }
            eprintln!("{}", serde_json::json!({ "error": error }));
            ExitCode::FAILURE
        }
    }
}
