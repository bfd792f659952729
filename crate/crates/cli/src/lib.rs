//! Command-line orchestration: configuration loading, the experiment
//! commands and their on-disk artifacts.

pub mod commands;
pub mod io;
pub mod selftest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "polaron", version, about = "Mean-field polaron and Choquard limit solver", arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads for the sweep (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the coupled system at one ε and write the time series.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        eps: Option<f64>,
        /// Also write the final fields as a binary snapshot.
        #[arg(long)]
        snapshot: bool,
    },
    /// Run both solvers at one ε and write the scaled error series.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Compare over the whole ε list and fit the convergence slope.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Replace the solvers by the exact power law `error = c·ε^p`.
        #[arg(long, hide = true, value_name = "C,P")]
        synthetic: Option<String>,
    },
    /// Run the built-in oracle checks.
    Selftest {
        /// Perturb one entry of the free-propagator multiplier.
        #[arg(long, hide = true)]
        corrupt_multiplier: bool,
    },
    /// Compute the Choquard ground state for the configured mass.
    Groundstate {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Usage,
    Blowup,
    /// Sweep slope outside its window, or a failed selftest check.
    CheckFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Usage => 1,
            Status::Blowup => 2,
            Status::CheckFailed => 3,
        }
    }
}

/// Failure of a command, tagged with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { status: Status::Usage, error: error.into() }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(error: E) -> Self {
        Failure { status: Status::Usage, error: error.into() }
    }
}

pub fn execute(cli: Cli) -> Status {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return Status::Usage;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Run { common, eps, snapshot } => commands::run(&common, eps, snapshot),
        Command::Compare { common, eps } => commands::compare(&common, eps),
        Command::Sweep { common, synthetic } => commands::sweep(&common, synthetic.as_deref()),
        Command::Selftest { corrupt_multiplier } => Ok(selftest::report(corrupt_multiplier)),
        Command::Groundstate { common } => commands::groundstate(&common),
    };
    match outcome {
        Ok(status) => status,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.status
        }
    }
}
