//! Command-line driver: sampling, evaluation, sensitivity analysis,
//! optimization and reporting, each writing a self-describing directory.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use config::{ExperimentConfig, LoadedConfig};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "mfbo", version, about = "Sensitivity analysis and multi-fidelity Bayesian optimization")]
pub struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for `evaluate`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Continue an interrupted `optimize` run from its history.
    #[arg(long, global = true)]
    pub resume: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Saltelli design collection.
    Sample,
    /// Evaluate the objective over a design file.
    Evaluate,
    /// Sobol' indices with bootstrap intervals and a convergence scan.
    Analyze,
    /// Single- or multi-fidelity Bayesian optimization.
    Optimize,
    /// Compare optimization runs.
    Report {
        /// Optimize output directories (or experiment roots).
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Tolerance, in percent of the best known value, for the cost-to-reach column.
        #[arg(long, default_value_t = 1.0)]
        within: f64,
    },
}

pub fn run(cli: &Cli) -> Result<()> {
    if cli.resume && !matches!(cli.command, Command::Optimize) {
        log::warn!("--resume only applies to `optimize`");
    }
    if let Command::Report { runs, within } = &cli.command {
        let cfg = cli.config.as_deref().map(LoadedConfig::load).transpose()?;
        let out = match (&cli.out, &cfg) {
            (Some(o), _) => o.clone(),
            (None, Some(c)) => c.output_dir(None).join("report"),
            (None, None) => PathBuf::from("report"),
        };
        return commands::report::run(runs, *within, &out, cfg.as_ref());
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = LoadedConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.config.seed = s;
    }
    let out = cfg.output_dir(cli.out.as_deref());
    match cli.command {
        Command::Sample => commands::sample::run(&cfg, &out),
        Command::Evaluate => commands::evaluate::run(&cfg, &out, cli.jobs),
        Command::Analyze => commands::analyze::run(&cfg, &out),
        Command::Optimize => commands::optimize::run(&cfg, &out, cli.resume),
        Command::Report { .. } => unreachable!(),
    }
}
