//! `pro`: simulate, fit, predict, evaluate and run studies from the command line.
//!
//! Every command writes into an output directory and finishes by writing a
//! `manifest.json` that records the resolved options, input digests and tool
//! version. `pro replay --manifest DIR/manifest.json --out NEW` re-runs it.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage or configuration
//! error, 3 malformed or inconsistent input, 4 numeric degeneracy.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pro_core::ProError;

pub mod commands;
pub mod manifest;
pub mod settings;

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_DEGENERATE: u8 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// Malformed or inconsistent input file.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Io(String),
    #[error("{context}: {source}")]
    Core { context: String, source: ProError },
}

impl CliError {
    pub fn core(context: impl Into<String>, source: ProError) -> Self {
        CliError::Core { context: context.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_PARSE,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
            CliError::Io(_) => EXIT_OTHER,
            CliError::Core { source, .. } => core_exit_code(source),
        }
    }
}

pub fn core_exit_code(e: &ProError) -> u8 {
    match e {
        ProError::Parse { .. }
        | ProError::InvalidDataset(_)
        | ProError::InvalidSweep(_)
        | ProError::SchemaMismatch { .. }
        | ProError::UnknownTerm(_) => EXIT_PARSE,
        ProError::Config(_) | ProError::Domain(_) => EXIT_USAGE,
        ProError::Singular
        | ProError::DegenerateResponse { .. }
        | ProError::DegenerateLabels
        | ProError::EmptyDesign
        | ProError::AllDropped(_)
        | ProError::UndefinedStatistic(_)
        | ProError::DegenerateAbscissa => EXIT_DEGENERATE,
        ProError::MarkerUndefined { .. }
        | ProError::IndexOutOfRange { .. }
        | ProError::LengthMismatch(..)
        | ProError::Io(_) => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "pro", version, about = "Point-process response models for flash-evoked spike trains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate LIF sweeps driven by Bernoulli flash trains.
    Simulate(SimulateArgs),
    /// Fit the logistic point-process model to a dataset.
    Fit(FitArgs),
    /// Write one-step-ahead spike probabilities for every bin.
    Predict(PredictArgs),
    /// Score a model on a dataset: ROC curve and AUC.
    Evaluate(EvaluateArgs),
    /// Run a replicated simulation study.
    Study(StudyArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct OutputArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Flat TOML config file keyed by long flag names; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct LifFlags {
    /// Membrane capacitance [default: 7].
    #[arg(long)]
    pub c: Option<f64>,
    /// Membrane resistance [default: 3].
    #[arg(long)]
    pub r: Option<f64>,
    /// Euler substeps per 5 ms bin [default: 100].
    #[arg(long)]
    pub substeps: Option<usize>,
    /// Bernoulli flash probability per bin [default: 0.14].
    #[arg(long)]
    pub flash_prob: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// Bins per sweep [default: 5000].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Number of sweeps; sweep i uses seed mix(seed, i) [default: 1].
    #[arg(long)]
    pub sweeps: Option<usize>,
    /// Base seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub lif: LifFlags,
}

#[derive(Debug, Args, Default, Clone)]
pub struct FitArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// Dataset CSV (`sweep,bin,flash,spike`).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Model terms, e.g. `PF,CF,SF,CF*SF` [default: PF,CF,SF,CF*SF].
    #[arg(long)]
    pub terms: Option<String>,
    /// Select terms by stepwise AIC from the full polynomial model.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stepwise: Option<bool>,
    /// Maximum total degree of the stepwise candidate terms [default: 3].
    #[arg(long)]
    pub max_degree: Option<u8>,
    /// Sweeps used for fitting: `all`, or ids and ranges such as `0-9,12`.
    #[arg(long)]
    pub train_sweeps: Option<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct PredictArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sweeps to score: `all`, or ids and ranges [default: all].
    #[arg(long)]
    pub sweeps: Option<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// Model JSON written by `fit`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Sweeps to score: `all`, or ids and ranges [default: all].
    #[arg(long)]
    pub sweeps: Option<String>,
    /// Take labels from the dataset's spike column (the only label source) [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub labels_from_data: Option<bool>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct StudyArgs {
    #[command(flatten)]
    pub output: OutputArgs,
    /// One of `significance`, `auc`, `sweep-c`, `sweep-r`.
    #[arg(long)]
    pub study: Option<String>,
    /// Replications (per grid value for sweeps) [default: 1000, 20 for auc, 30 for sweeps].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Bins per replication [default: 5000, 10000 for auc].
    #[arg(long)]
    pub bins: Option<usize>,
    /// Significance level [default: 0.05].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Base seed [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores; results do not depend on it [default: 0].
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub lif: LifFlags,
}

#[derive(Debug, Args, Clone)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory for the re-run.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
