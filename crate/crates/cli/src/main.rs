//! `pcl`: command-line front end for the Poisson-chaos experiments.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical guard
//! failure (including any panic caught at the top level).

mod commands;
mod config;
mod manifest;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcl_core::PclError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] PclError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(PclError::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

/// Flags shared by every experiment subcommand. Flags override `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Kernel: power_law:ALPHA[,SCALE] | indicator:LO,HI | bump:CENTER,HALFWIDTH
    #[arg(long)]
    pub kernel: Option<String>,
    /// Nonlinearity: gaussian_bump | modulated_gaussian:LAMBDA | poly:C0,C1,.. | poly:<expression in x>
    #[arg(long)]
    pub phi: Option<String>,
    /// Truncation order d (defaults to d_alpha for power-law kernels, else 1)
    #[arg(long)]
    pub d: Option<String>,
    /// Power-law exponent; replaces the exponent of a power_law kernel
    #[arg(long)]
    pub alpha: Option<String>,
    /// Sample sizes, comma separated (1e4 and 2^14 forms accepted)
    #[arg(long)]
    pub n: Option<String>,
    /// Monte Carlo replications
    #[arg(long)]
    pub reps: Option<String>,
    /// Master seed (default 0)
    #[arg(long)]
    pub seed: Option<String>,
    /// Integration window: `whole` or LO,HI
    #[arg(long, allow_hyphen_values = true)]
    pub window: Option<String>,
    /// Output directory (default pcl-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value configuration file; a manifest.txt also works
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Parser, Debug)]
#[command(name = "pcl", version, about = "Poisson-chaos Breuer-Major experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Characteristic function E exp(i theta X_0) of the Poisson shot noise
    Charfn {
        #[command(flatten)]
        common: Common,
        /// Comma-separated theta values
        #[arg(long, allow_hyphen_values = true, default_value = "1")]
        theta: String,
    },
    /// Simulate one replication of the truncated partial-sum path
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Replication index
        #[arg(long, default_value = "0")]
        rep: String,
        /// Comma-separated times in [0,1]
        #[arg(long)]
        times: Option<String>,
    },
    /// Limit variance mu^2 by one of the three routes
    Variance {
        #[command(flatten)]
        common: Common,
        /// chaos_series | covariance_series | monte_carlo
        #[arg(long, default_value = "chaos_series")]
        method: String,
        /// Shift cutoff of the analytic series
        #[arg(long, default_value = "200")]
        cutoff: String,
    },
    /// Truncated moment B_{n,ell,m} against its limit
    Moments {
        #[command(flatten)]
        common: Common,
        /// Comma-separated theta vector (length ell <= 3)
        #[arg(long, allow_hyphen_values = true, default_value = "1,-1")]
        thetas: String,
        /// Upper chaos order m
        #[arg(long, default_value = "4")]
        m: String,
    },
    /// Partition counts and diagram formula against Monte Carlo
    DiagramCheck {
        #[command(flatten)]
        common: Common,
        /// Group shape, e.g. 2,2 or 1,1,2
        #[arg(long, default_value = "2,2")]
        shape: String,
    },
    /// Envelope products and covariance decay of the shifted kernels
    PsiEstimates {
        #[command(flatten)]
        common: Common,
        /// Largest shift u
        #[arg(long, default_value = "50")]
        u_max: String,
        /// Envelope exponent (defaults to alpha)
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Full CLT report: report.csv and summary.json
    Clt {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times in [0,1]
        #[arg(long)]
        times: Option<String>,
        /// fdd coefficients b
        #[arg(long, allow_hyphen_values = true)]
        b: Option<String>,
        /// fdd times t
        #[arg(long)]
        t: Option<String>,
    },
    /// Moment-bound ratio table for three functional families
    SgCheck {
        #[command(flatten)]
        common: Common,
        /// Comma-separated theta values for the exponential family
        #[arg(long, allow_hyphen_values = true, default_value = "0.5,1,2")]
        thetas: String,
        /// Comma-separated moment orders p >= 2
        #[arg(long, default_value = "2,4")]
        p: String,
        /// Samples of X_0
        #[arg(long, default_value = "1e5")]
        samples: String,
    },
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("PCL_THREADS") {
        let n = parse::count(&v)? as usize;
        if n == 0 {
            return Err(CliError::Usage("PCL_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure {n} worker threads: {e}")))?;
    }
    Ok(())
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Err(CliError::Usage("invalid command line".into())) } else { Ok(()) };
        }
    };
    configure_threads()?;
    commands::dispatch(cli.command)
}

/// Runs one command line and maps the outcome onto {0, 1, 2}.
pub fn dispatch(argv: Vec<String>) -> u8 {
    match std::panic::catch_unwind(|| run(argv)) {
        Ok(Ok(())) => 0,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            2
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::panic::set_hook(Box::new(|info| eprintln!("panic: {info}")));
    ExitCode::from(dispatch(std::env::args().collect()))
}
