//! `procalign`: discover process models, align probabilistic traces, tune
//! and evaluate the calibration, and generate synthetic corpora.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 for usage and
//! configuration errors. Log verbosity is read from `PROCALIGN_LOG`
//! (`error`, `warn`, `info`, `debug`, `trace`).

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "procalign", version, about = "Process-aware calibration of activity recognition")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: current directory)
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover a Petri net from an event log with a dependency-threshold sweep
    Discover(DiscoverArgs),
    /// Align one probabilistic trace against a Petri net
    Align(AlignArgs),
    /// Tune epsilon on a labeled validation dataset
    Tune(TuneArgs),
    /// Compare calibrated and argmax labelings on a labeled test dataset
    Evaluate(EvaluateArgs),
    /// Generate a synthetic labeled corpus and run seeded experiments
    Synth(SynthArgs),
    /// Split a labeled dataset, discover, tune and evaluate end to end
    Pipeline(PipelineArgs),
}

#[derive(Args)]
pub struct DiscoverArgs {
    /// Event log CSV with case, activity and optional timestamp columns
    #[arg(long)]
    log: Option<PathBuf>,
    /// Dependency thresholds, comma separated
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct AlignArgs {
    /// Petri net in PNML
    #[arg(long)]
    net: Option<PathBuf>,
    /// Probabilistic trace, CSV (one column per activity) or JSON
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Confidence threshold in (0, 1]
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    net: Option<PathBuf>,
    /// Labeled dataset: JSON array of traces with `truth` labels
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Epsilon grid, comma separated (default 0.05, 0.10, ..., 1.00)
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Generating Petri net in PNML
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    n_traces: Option<usize>,
    /// Maximum visible activities per sampled trace
    #[arg(long)]
    max_len: Option<usize>,
    /// Dirichlet noise with this concentration on the true label
    #[arg(long, conflicts_with = "confusion")]
    dirichlet: Option<f64>,
    /// Confusion noise FROM:TO:MASS; repeatable
    #[arg(long)]
    confusion: Vec<String>,
    #[arg(long)]
    noise_seed: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeded experiment repetitions
    #[arg(long)]
    repetitions: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Train, validation and test fractions, comma separated
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Discover the model from the training truths instead of using the net
    #[arg(long)]
    discover: bool,
}

#[derive(Args)]
pub struct PipelineArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Use this net instead of discovering one from the training split
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
}

/// Error caused by invalid arguments, configuration or missing inputs.
#[derive(Debug)]
pub struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Discover(a) => commands::discover(a, &config, cli.out),
        Command::Align(a) => commands::align_cmd(a, &config, cli.out),
        Command::Tune(a) => commands::tune(a, &config, cli.out),
        Command::Evaluate(a) => commands::evaluate_cmd(a, &config, cli.out),
        Command::Synth(a) => commands::synth(a, &config, cli.out),
        Command::Pipeline(a) => commands::pipeline(a, &config, cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PROCALIGN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
