//! `clqg` — experiment harness for coherent quantum LQG controller
//! synthesis.
//!
//! Subcommands: `verify` (re-evaluate the published controllers),
//! `optimize` (run a synthesis from a config file), `ablate` (the
//! component-ablation grid), `trace-export` (stream a stored convergence
//! trace as CSV).
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O
//! error.

mod ablation;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Verification(String),
    Usage(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<coherent_lqg::Error> for CliError {
    fn from(e: coherent_lqg::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "clqg", about = "Coherent quantum LQG controller synthesis harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Re-evaluate the published controllers and check them against their
    /// reported performance indices and constraint residuals.
    Verify {
        /// Load fixtures from a directory of JSON files instead of the
        /// embedded copies.
        #[arg(long)]
        fixtures: Option<std::path::PathBuf>,
    },
    /// Run a controller synthesis from a config file.
    Optimize {
        #[arg(long)]
        config: std::path::PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Run ablation variants on the squeezed scenario.
    Ablate {
        /// Comma-separated variant rows, e.g. "0,2,8".
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long)]
        seed: u64,
        /// Budget preset: full, desk, or smoke.
        #[arg(long, default_value = "desk")]
        budget: String,
        #[arg(long)]
        out: std::path::PathBuf,
        /// Interpret fixed search ranges in unscaled (physical) units
        /// instead of the scaled search space.
        #[arg(long)]
        unscaled_fixed_range: bool,
    },
    /// Stream the convergence trace of a result directory as CSV.
    TraceExport { result_dir: std::path::PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify { fixtures } => commands::cmd_verify(fixtures.as_deref()),
        Command::Optimize { config, seed, out } => commands::cmd_optimize(&config, seed, &out),
        Command::Ablate { rows, seed, budget, out, unscaled_fixed_range } => {
            commands::cmd_ablate(&rows, seed, &budget, &out, unscaled_fixed_range)
        }
        Command::TraceExport { result_dir } => commands::cmd_trace_export(&result_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
