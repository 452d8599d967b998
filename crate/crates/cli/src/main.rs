//! Experiment harness for the fixed-lag smoothing engine.
//!
//! Every command reads a JSON config, takes an explicit `--seed` and writes
//! CSV results with a JSON metadata sidecar into `--out`. Exit codes: 0 on
//! success, 1 on configuration/input errors, 2 on runtime numerical errors.

mod commands;
mod io;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fixlag", version, about = "Fixed-lag SMC smoothing benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; all randomness is derived from it.
    #[arg(long)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset under the configured model.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the configured horizon.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run one smoothing pass over a dataset and record the estimate.
    Smooth {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset CSV produced by `simulate`.
        #[arg(long)]
        dataset: PathBuf,
        /// Override the configured particle count.
        #[arg(long)]
        particles: Option<usize>,
    },
    /// Replicate smoothing estimates over a grid of lags.
    BenchLags {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the configured replicate count.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Replicate smoothing estimates over a grid of particle counts.
    BenchScaling {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Run (SMC)EM parameter estimation over a dataset.
    Mcem {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: PathBuf,
        /// Override the number of independent EM runs.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Record the unique time-0 ancestor count per time step.
    Degeneracy {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Error classes mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<fixlag::Error> for CliError {
    fn from(e: fixlag::Error) -> Self {
        fn is_config(e: &fixlag::Error) -> bool {
            match e {
                fixlag::Error::InvalidParameter(_) | fixlag::Error::InvalidConfig(_) => true,
                fixlag::Error::EmIteration { source, .. } => is_config(source),
                _ => false,
            }
        }
        if is_config(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("csv: {e}"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { common, n } => commands::simulate::run(&common, n),
        Command::Smooth { common, dataset, particles } => {
            commands::smooth::run(&common, &dataset, particles)
        }
        Command::BenchLags { common, replicates } => commands::bench_lags::run(&common, replicates),
        Command::BenchScaling { common, replicates } => {
            commands::bench_scaling::run(&common, replicates)
        }
        Command::Mcem { common, dataset, seeds } => commands::mcem::run(&common, &dataset, seeds),
        Command::Degeneracy { common } => commands::degeneracy::run(&common),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.print().ok();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Usage problems are configuration errors under the exit-code contract.
            e.print().ok();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
