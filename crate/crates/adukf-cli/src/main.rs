//! Benchmark CLI: scenario generation, single-filter estimation, and the
//! full variant sweep with CSV outputs.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 numerical failure.

mod commands;
mod config;
mod io;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Numerical(String),
}

impl AppError {
    pub fn usage(msg: impl Into<String>) -> Self {
        AppError::Usage(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        AppError::Numerical(msg.into())
    }

    fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "adukf",
    version,
    about = "Unscented Kalman filter benchmark on a six-state anaerobic digestion model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the plant and write truth.csv and measurements.csv
    Simulate {
        /// JSON run configuration (defaults to the built-in scenario)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one filter variant over a measurement file
    Estimate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input measurement series (schema of `simulate`)
        #[arg(long)]
        measurements: PathBuf,
        /// Output estimates CSV path
        #[arg(long)]
        out: PathBuf,
        /// Variant name (overrides the config filter block)
        #[arg(long)]
        variant: Option<String>,
        /// Sigma-point scaling override
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Sweep every variant over the seed list and write summary.csv
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Restricts the sweep to a single seed
        #[arg(long)]
        seed: Option<u64>,
        /// Restricts the sweep to one variant (suffixes allowed)
        #[arg(long)]
        variant: Option<String>,
        /// Restricts the unconstrained cells to one scaling override
        #[arg(long)]
        gamma: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = RunConfig::load(config.as_deref())?;
            commands::simulate(&cfg, &out, seed)
        }
        Command::Estimate {
            config,
            measurements,
            out,
            variant,
            gamma,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            commands::estimate(&cfg, &measurements, &out, variant.as_deref(), gamma)
        }
        Command::Benchmark {
            config,
            out,
            seed,
            variant,
            gamma,
        } => {
            let cfg = RunConfig::load(config.as_deref())?;
            commands::benchmark(&cfg, &out, seed, variant.as_deref(), gamma)
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
