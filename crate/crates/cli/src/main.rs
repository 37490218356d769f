//! Command-line driver: seeded channel-mixture runs, chi archives and
//! plot-ready CSV series.

mod archive;
mod commands;
mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

/// Exit codes: 0 ok, 2 configuration, 3 numerical failure, 4 archive schema.
#[derive(Debug, Error)]
pub(crate) enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("archive: {0}")]
    Schema(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Schema(_) => 4,
        }
    }
}

impl From<chanmix::experiment::ExperimentError> for CliError {
    fn from(e: chanmix::experiment::ExperimentError) -> Self {
        match e {
            chanmix::experiment::ExperimentError::Config(msg) => CliError::Config(msg),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "chanmix",
    version,
    about = "Convex mixtures of single-qubit Pauli channels: simulation, tomography and memory diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form series: probabilities, divisibility witness, gbar, trace distances
    Ideal(RunArgs),
    /// Seeded tomography run; writes a chi archive plus the same analysis series
    Simulate(RunArgs),
    /// Recompute every analysis series from a stored archive
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
pub(crate) struct RunArgs {
    /// JSON configuration file; flags override its values
    #[arg(long)]
    pub(crate) config: Option<PathBuf>,
    /// caseA or caseB
    #[arg(long)]
    pub(crate) scenario: Option<String>,
    /// base seed for the replica streams
    #[arg(long)]
    pub(crate) seed: Option<u64>,
    /// photon shots per projector
    #[arg(long)]
    pub(crate) shots: Option<u64>,
    /// tomography replicas per channel and time
    #[arg(long)]
    pub(crate) replicas: Option<usize>,
    /// time step between witness pair members
    #[arg(long)]
    pub(crate) epsilon: Option<f64>,
    /// output directory (falls back to CHANMIX_OUT_DIR, then "out")
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct AnalyzeArgs {
    /// archive written by ideal or simulate
    pub(crate) archive: PathBuf,
    /// output directory (falls back to CHANMIX_OUT_DIR, then "out")
    #[arg(long)]
    pub(crate) out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ideal(args) => commands::cmd_ideal(&args),
        Command::Simulate(args) => commands::cmd_simulate(&args),
        Command::Analyze(args) => commands::cmd_analyze(&args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
