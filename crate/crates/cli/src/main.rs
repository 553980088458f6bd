//! `jclab`: command-line experiments for Jordan-Chevalley decompositions.
//!
//! Exit status is 0 on success, 2 for unusable input and 3 for numerical
//! failures. Failures print a JSON diagnostic on stderr.

mod artifact;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Lib(#[from] jclab::Error),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numeric() => 3,
            CliError::Check(_) => 3,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Lib(e) if e.is_numeric() => "numeric",
            CliError::Lib(_) => "domain",
            CliError::Check(_) => "check",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "jclab", version, about = "Jordan-Chevalley decompositions, normalized power sequences and matrix sequences")]
struct Cli {
    /// Seed for every random stream; recorded in artifact headers.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decompose a matrix as A = D + N.
    Jc {
        #[arg(long)]
        input: PathBuf,
        /// Use exact rational arithmetic. Float input is converted exactly.
        #[arg(long)]
        exact: bool,
        /// Relative eigenvalue clustering tolerance.
        #[arg(long, default_value_t = jclab::jc::DEFAULT_CTOL)]
        ctol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the blow-up of ||D|| on the family A(delta).
    SweepUnbounded {
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Coupling exponent: the corner entry is delta^p.
        #[arg(long, default_value_t = jclab::unbounded::DEFAULT_EXPONENT)]
        p: f64,
        #[arg(long, default_value_t = jclab::unbounded::SWEEP_CTOL)]
        ctol: f64,
        /// Sweep the bounded 2x2 control family instead.
        #[arg(long)]
        control: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace the normalized power sequence |A^k|^{1/k}.
    Nps {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1024)]
        kmax: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the bounded sequence whose JC parts are unbounded.
    SeqDemo {
        /// Witness size as `n=<int>`.
        #[arg(long, default_value = "n=3")]
        witness: String,
        #[arg(long, default_value_t = 100)]
        horizon: usize,
        #[arg(long, default_value_t = jclab::unbounded::SWEEP_CTOL)]
        ctol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Unitarily upper-triangularize a matrix sequence.
    Triangularize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized continuity check of the partition map.
    PartitionCheck {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("JC_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Input(format!("JC_LAB_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let seed = cli.seed;
    match cli.command {
        Command::Jc { input, exact, ctol, out } => commands::jc(&input, exact, ctol, out.as_deref(), seed),
        Command::SweepUnbounded { deltas, n, p, ctol, control, out } => {
            commands::sweep_unbounded(&deltas, n, p, ctol, control, out.as_deref(), seed)
        }
        Command::Nps { input, kmax, tol, out } => commands::nps(&input, kmax, tol, out.as_deref(), seed),
        Command::SeqDemo { witness, horizon, ctol, out } => {
            commands::seq_demo(&witness, horizon, ctol, out.as_deref(), seed)
        }
        Command::Triangularize { input, out } => commands::triangularize(&input, out.as_deref(), seed),
        Command::PartitionCheck { n, trials, out } => commands::partition_check(n, trials, out.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let diag = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{diag}");
            ExitCode::from(e.exit_code())
        }
    }
}
