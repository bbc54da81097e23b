//! `cns`: reproducible colored-noise sampling experiments.
//!
//! ```text
//! cns gen-gamma|sample|analyze|ablate --config <file> --out <dir> [--threads N] [--seed S]
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 I/O error.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cns", version, about = "Colored noise sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Override the root seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the per-band progress matrix from oracle trajectories.
    GenGamma(Common),
    /// Draw samples with the ODE, white SDE, colored schedule or mBm noise.
    Sample(Common),
    /// Spectral gap, noise persistence and energy-drift reports.
    Analyze(Common),
    /// Sample under schedule ablations and report the spectral gap of each.
    Ablate(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, f): (&Common, fn(&Config, &std::path::Path) -> Result<(), CliError>) = match &cli.command {
        Command::GenGamma(c) => (c, commands::gen_gamma),
        Command::Sample(c) => (c, commands::sample),
        Command::Analyze(c) => (c, commands::analyze),
        Command::Ablate(c) => (c, commands::ablate),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
    f(&cfg, &common.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
