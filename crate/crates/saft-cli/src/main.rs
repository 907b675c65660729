//! saft: size-adaptive fairness audits for binary classifiers.
//!
//! Subcommands: `audit` tests every intersectional subgroup of a prediction
//! CSV, `resolution` maps the smallest detectable disparity against group
//! size, `simulate` generates synthetic datasets, and `validate` runs the
//! statistical self-checks. Exit codes: 0 success, 1 validation gate
//! violated, 2 usage error, 3 runtime failure.

mod commands;
mod config;
mod csv_io;
mod report;

use clap::Parser;

/// Top-level failure classes, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A validation experiment ran but its acceptance band was violated.
    #[error("{0}")]
    GateFailed(String),
    /// Bad flags, config, or input data.
    #[error("{0}")]
    Usage(String),
    /// IO or engine failure during execution.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::GateFailed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "saft",
    version,
    about = "Size-adaptive fairness audits for binary classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Audit a prediction CSV for subgroup disparities.
    Audit(commands::AuditArgs),
    /// Map detectability limits across group sizes and base rates.
    Resolution(commands::ResolutionArgs),
    /// Generate a synthetic prediction dataset.
    Simulate(commands::SimulateArgs),
    /// Run a statistical self-check experiment.
    Validate(commands::ValidateArgs),
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Audit(args) => commands::cmd_audit(args),
        Command::Resolution(args) => commands::cmd_resolution(args),
        Command::Simulate(args) => commands::cmd_simulate(args),
        Command::Validate(args) => commands::cmd_validate(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
