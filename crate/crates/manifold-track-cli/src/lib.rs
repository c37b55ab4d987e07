//! Experiment runner around the `manifold-track` library: scenario files,
//! Monte-Carlo sweeps, CSV emission, and the command-line interface.

pub mod cli;
pub mod commands;
pub mod csv_io;
pub mod plan;
pub mod runner;
pub mod scenario_file;

use std::fmt;

/// Runner-level errors, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad command line; exits with status 2.
    Usage(String),
    /// Everything else (IO, parsing, numerics); exits with status 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<manifold_track::Error> for CliError {
    fn from(e: manifold_track::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Parses arguments and runs the selected subcommand.
pub fn run(args: &[String]) -> Result<(), CliError> {
    match cli::parse_args(args)? {
        cli::Command::Simulate(plan) => commands::cmd_simulate(&plan),
        cli::Command::Run(plan) => commands::cmd_run(&plan),
        cli::Command::PlotData { out, summaries } => commands::cmd_plotdata(&out, &summaries),
    }
}
