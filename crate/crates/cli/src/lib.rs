//! Library half of the `zeno` command-line tool.

use std::fmt;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags or configuration; exit code 2.
    Usage(String),
    /// Numeric failure or violated invariant; exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<zeno_core::Error> for CliError {
    fn from(e: zeno_core::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o error: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "zeno", version, about = "Measured quantum dynamics: exact propagation against effective rate equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Landau-Zener sweep under repeated measurement.
    Lz(commands::lz::LzArgs),
    /// Stroboscopic measurements of a constant generator against Pauli rates.
    Strobe(commands::strobe::StrobeArgs),
    /// Randomized check of the structural identities.
    Check(commands::check::CheckArgs),
}

/// Runs a parsed command; `Ok(false)` means it completed but a check failed.
pub fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Lz(args) => commands::lz::run(&args).map(|()| true),
        Command::Strobe(args) => commands::strobe::run(&args).map(|()| true),
        Command::Check(args) => commands::check::run(&args),
    }
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Failure(format!("cannot start worker pool: {e}")))
}
