//! Command-line driver: reference runs, twin experiments, resolution sweeps,
//! rigorous-bound reports and plot-ready data extraction.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "benard-da",
    about = "2D Rayleigh-Benard convection with vorticity-nudging data assimilation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Allow paper-scale runs (Ra >= 2.5e7; hours of compute).
    #[arg(long)]
    long: bool,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Spin up a reference solution to the attractor; write checkpoint + Nu series.
    Reference {
        #[command(flatten)]
        common: Common,
    },
    /// Run a twin experiment from a reference checkpoint (or fresh spin-up).
    Twin {
        #[command(flatten)]
        common: Common,
    },
    /// Run one twin experiment per (nF, nC) projection pair.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Pairs like 6x8,24x7 (falls back to config sweep_pairs).
        #[arg(long)]
        pairs: Option<String>,
        /// Parallel experiments (each uses two worker threads).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the rigorous-bound report for the configured parameters.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Emit (t, log10 error) columns from a twin time series.
    Plotdata {
        /// Twin time-series CSV.
        series: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Process-level error with a distinct exit code per failure class.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Blowup(String),
    Io(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Blowup(_) => 3,
            CliError::Io(_) => 4,
            CliError::Other(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Blowup(m) => write!(f, "numerical blow-up: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<benard::Error> for CliError {
    fn from(e: benard::Error) -> Self {
        use benard::Error::*;
        match e {
            NonFinite { .. } => CliError::Blowup(e.to_string()),
            Io(_) | CheckpointBadMagic | CheckpointChecksum | CheckpointTruncated(_)
            | CheckpointVersion { .. } | TimeSeries(_) => CliError::Io(e.to_string()),
            InvalidGrid(_) | InvalidParam(_) | InvalidModes(_) | GridMismatch => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::parse_file(&common.config).map_err(CliError::Config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Reference { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_reference(&cfg, common.long)
        }
        Command::Twin { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_twin(&cfg, common.long)
        }
        Command::Sweep {
            common,
            pairs,
            jobs,
        } => {
            let cfg = load_config(&common)?;
            let pairs = match pairs {
                Some(p) => config::parse_pairs(&p).map_err(CliError::Config)?,
                None if !cfg.sweep_pairs.is_empty() => cfg.sweep_pairs.clone(),
                None => {
                    return Err(CliError::Config(
                        "no sweep pairs: pass --pairs or set sweep_pairs in the config".into(),
                    ))
                }
            };
            commands::cmd_sweep(&cfg, &pairs, jobs, common.long)
        }
        Command::Bounds { common } => {
            let cfg = load_config(&common)?;
            commands::cmd_bounds(&cfg, common.out.is_some())
        }
        Command::Plotdata { series, out } => commands::cmd_plotdata(&series, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
