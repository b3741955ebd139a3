//! Command-line experiment runner for `eddy-mlmc`.
//!
//! Exit codes: 0 success (also for bias-unconverged runs, which are flagged in
//! the output), 1 I/O failure, 2 configuration error, 3 numerical failure.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<eddy_mlmc::Error> for CliError {
    fn from(e: eddy_mlmc::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eddy-mlmc", version, about = "MLMC for the stochastic wire-in-tube eddy-current problem")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override `rng.master_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override `experiment.out_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sample evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-level variance screening -> screening.csv
    Screen,
    /// Adaptive MLMC at one relative tolerance -> mlmc_run.csv
    Run {
        #[arg(long)]
        eps: f64,
    },
    /// MC versus MLMC cost over a list of relative tolerances -> cost_compare.csv
    Compare {
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Quadrature reference for E[W] -> oracle.csv
    Oracle {
        #[arg(long)]
        quad_order: Option<usize>,
    },
    /// One nominal solve -> qoi.csv
    Qoi {
        #[arg(long)]
        level: usize,
    },
    /// Text dump of the nominal mesh -> mesh_l<level>.txt
    Mesh {
        #[arg(long)]
        level: usize,
    },
}

/// Effective configuration: file (or defaults) plus command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.experiment.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Screen => commands::screen(&cfg),
        Command::Run { eps } => commands::run(&cfg, *eps),
        Command::Compare { eps } => commands::compare(&cfg, eps.as_deref().unwrap_or(&cfg.experiment.eps)),
        Command::Oracle { quad_order } => commands::oracle(&cfg, quad_order.unwrap_or(cfg.experiment.quad_order)),
        Command::Qoi { level } => commands::qoi(&cfg, *level),
        Command::Mesh { level } => commands::mesh(&cfg, *level),
    }
}
