//! Command-line front end for the `dualdiv` solvers.
//!
//! A run is a [`config::RunConfig`] resolved against one subcommand; [`run::run`] writes CSV
//! artifacts and reports failed checks.

pub mod config;
pub mod report;
pub mod run;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("could not parse configuration: {0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Solver(#[from] dualdiv::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Exit status for a run that finished with every check passing.
pub const EXIT_OK: i32 = 0;
/// Exit status when a verification check or a simulation comparison failed.
pub const EXIT_VERIFICATION: i32 = 1;
/// Exit status for bad input or a run that could not complete.
pub const EXIT_INPUT: i32 = 2;
