//! Experiment runner behind the `eulerexit` binary.
//!
//! Each subcommand reads a config, runs one experiment and writes
//! `results.csv`, `meta.txt` and, when a rate is fitted, `fit.csv` to the
//! output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
pub mod experiments;
pub mod output;

pub use experiments::{run, run_config, Outcome};

/// Process exit codes.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const ASSUMPTION: i32 = 2;
    pub const WINDOW: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] eulerexit::Error),
}

#[derive(Debug, Parser)]
#[command(name = "eulerexit", version, about = "Exit-time convergence experiments for Euler schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub experiment: Experiment,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Experiment {
    /// Check the non-characteristic and Lipschitz assumptions on samples.
    VerifyAssumptions,
    /// L^p exit-time error against mesh size.
    ExitRate,
    /// L^2 stopped-position error against mesh size.
    StoppedRate,
    /// Mean exit times from starts near the boundary.
    BoundaryMoments,
    /// Exit-time moment recursion and exponential moment.
    Moments,
    /// One-step inside probability from boundary points.
    Crossing,
    /// One-step modulus exceedance probability.
    Modulus,
    /// Strong sup-norm error of the Euler scheme.
    EulerStrongError,
    /// Survival function of the discrete exit time.
    Tails,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::VerifyAssumptions,
        Experiment::ExitRate,
        Experiment::StoppedRate,
        Experiment::BoundaryMoments,
        Experiment::Moments,
        Experiment::Crossing,
        Experiment::Modulus,
        Experiment::EulerStrongError,
        Experiment::Tails,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyAssumptions => "verify-assumptions",
            Experiment::ExitRate => "exit-rate",
            Experiment::StoppedRate => "stopped-rate",
            Experiment::BoundaryMoments => "boundary-moments",
            Experiment::Moments => "moments",
            Experiment::Crossing => "crossing",
            Experiment::Modulus => "modulus",
            Experiment::EulerStrongError => "euler-strong-error",
            Experiment::Tails => "tails",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Parses `args`, runs the experiment and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit_code::RUNTIME } else { exit_code::OK };
            let _ = e.print();
            return code;
        }
    };
    let Cli { experiment, common } = cli;
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code::RUNTIME;
        }
    };
    match pool.install(|| run(experiment, &common)) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code::RUNTIME
        }
    }
}
