//! `trendcast`: file-in, file-out front end for the core library.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trendcast_core::ErrorKind;

#[derive(Debug, Parser)]
#[command(
    name = "trendcast",
    version,
    about = "Structural time-series forecasting for search-intensity data"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Top-level random seed (falls back to the config file, then TRENDCAST_SEED).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct McmcArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read trends exports and write one canonical panel.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Map "<1" cells to 0.5 (true) or to 0 (false).
        #[arg(long, value_name = "BOOL")]
        lt_half: Option<bool>,
    },
    /// Average the queries of a panel into one series.
    Average { panel: PathBuf },
    /// Fit a model to a series by Gibbs sampling.
    Fit {
        series: PathBuf,
        /// Model specification (JSON); local linear trend when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        mcmc: McmcArgs,
    },
    /// Posterior-predictive forecast from a draws file.
    Forecast {
        draws: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Compare models by cumulative absolute one-step-ahead error.
    Compare {
        #[arg(required = true)]
        draws: Vec<PathBuf>,
    },
    /// Pearson correlation of two series.
    Correlate {
        a: PathBuf,
        b: PathBuf,
        /// Average monthly inputs to annual values first.
        #[arg(long)]
        annualize: bool,
    },
    /// Counterfactual impact of an intervention.
    Impact {
        series: PathBuf,
        /// Pre-period `A..B`, inclusive; periods (2015-01) or 0-based positions.
        #[arg(long)]
        pre: Option<String>,
        /// Post-period `C..D`, inclusive.
        #[arg(long)]
        post: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        mcmc: McmcArgs,
        #[arg(long)]
        trajectories: Option<usize>,
        /// Credibility level of the reported intervals.
        #[arg(long)]
        level: Option<f64>,
    },
}

/// A failure together with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl From<trendcast_core::Error> for Failure {
    fn from(e: trendcast_core::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Argument => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        };
        Failure {
            code,
            error: e.into(),
        }
    }
}

impl Failure {
    pub fn argument(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { paths, lt_half } => commands::ingest(&cli.global, &paths, lt_half),
        Command::Average { panel } => commands::average(&cli.global, &panel),
        Command::Fit {
            series,
            model,
            mcmc,
        } => commands::fit(&cli.global, &series, model.as_deref(), &mcmc),
        Command::Forecast {
            draws,
            horizon,
            trajectories,
        } => commands::forecast(&cli.global, &draws, horizon, trajectories),
        Command::Compare { draws } => commands::compare(&cli.global, &draws),
        Command::Correlate { a, b, annualize } => {
            commands::correlate(&cli.global, &a, &b, annualize)
        }
        Command::Impact {
            series,
            pre,
            post,
            model,
            mcmc,
            trajectories,
            level,
        } => commands::impact(
            &cli.global,
            &series,
            commands::ImpactArgs {
                pre,
                post,
                model,
                mcmc,
                trajectories,
                level,
            },
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
