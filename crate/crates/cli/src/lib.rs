//! Command-line front end: `generate` benchmark data, `fit` a configured
//! model, and `score` a saved report against a dataset.
//!
//! Exit codes are listed in [`error::exit`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use error::{exit, CliError, CliResult};
use sindy_core::model::Metric;

#[derive(Debug, Parser)]
#[command(name = "sindy", version, about = "Sparse identification of governing equations")]
pub struct Cli {
    /// Config file (benchmark spec for `generate`, discovery config for `fit`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for data generation or ensemble sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark dataset and its ground truth.
    Generate,
    /// Fit a model as configured.
    Fit {
        /// `fd:<order> | sg:<window>,<poly> | spectral[:<filter>]`
        #[arg(long)]
        diff: Option<String>,
        /// `stlsq[:λ,α] | sr3[:λ,ν,l0|l1] | ssr | frols`
        #[arg(long)]
        optimizer: Option<String>,
        /// `n=20,rows=0.6,replace=true,drop=0,agg=median,threshold=0.5,seed=0`
        #[arg(long)]
        ensemble: Option<String>,
    },
    /// Score a saved report on a dataset.
    Score {
        /// Report written by `fit`; `--config` is accepted as well.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Dataset directory or CSV file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "r2")]
        metric: String,
        /// Score only the samples after this leading fraction of time.
        #[arg(long)]
        split: Option<f64>,
    },
}

fn require_config(cli: &Cli) -> CliResult<PathBuf> {
    cli.config
        .clone()
        .ok_or_else(|| CliError::Config("--config is required".into()))
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Generate => {
            let dir = commands::generate(&require_config(cli)?, cli.out.as_deref(), cli.seed)?;
            println!("{}", dir.display());
        }
        Command::Fit {
            diff,
            optimizer,
            ensemble,
        } => {
            let over = commands::FitOverrides {
                out: cli.out.clone(),
                seed: cli.seed,
                diff: diff.clone(),
                optimizer: optimizer.clone(),
                ensemble: ensemble.clone(),
            };
            let outcome = commands::fit(&require_config(cli)?, &over)?;
            for line in &outcome.report.equations {
                println!("{line}");
            }
        }
        Command::Score {
            report,
            data,
            metric,
            split,
        } => {
            let path = report
                .clone()
                .or_else(|| cli.config.clone())
                .ok_or_else(|| CliError::Config("--report is required".into()))?;
            let metric: Metric = metric.parse().map_err(CliError::config)?;
            let r = commands::score(&path, data, metric, *split, cli.out.as_deref())?;
            println!("{}", report::to_json(&r).trim_end());
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let level = if cli.verbose { "debug" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match dispatch(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
