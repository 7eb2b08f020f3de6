//! Command-line front end: argument parsing, configuration files and all
//! file output for the `pointnav` binary.

pub mod args;
pub mod commands;
pub mod config;
pub mod io;

use std::io::Write;

use thiserror::Error;

pub use args::{Cli, Command, OutputFormat};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl CliError {
    /// 2 for usage and configuration problems, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::CompareMeasures(a) => commands::cmd_compare_measures(a, out),
        Command::Simulate(a) => commands::cmd_simulate(a, out),
        Command::Replay(a) => commands::cmd_replay(a, out),
        Command::Metrics(a) => commands::cmd_metrics(a, out),
    }
}
