//! Experiment driver behind the `mdq` binary: game tables, saddle checks,
//! simulation statistics and risk-sensitive cost studies, all written as
//! CSV.

use std::io;
use std::path::PathBuf;

pub mod args;
pub mod experiment;
pub mod output;

pub use args::{Cli, Command, ExperimentKind, ExperimentSpec};
pub use experiment::run_experiment;
pub use output::{emit_csv, Field, Row};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Output could not be written.
    pub const IO: i32 = 1;
    /// Bad arguments or configuration.
    pub const CONFIG: i32 = 2;
    /// A numerical routine failed or the requested quantity is undefined.
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read config {}: {source}", path.display())]
    ReadConfig { path: PathBuf, source: io::Error },

    #[error("cannot create {}: {source}", path.display())]
    Output { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] mdq_core::Error),

    #[error("write failed: {0}")]
    Io(#[from] io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mdq_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::ReadConfig { .. } => exit::CONFIG,
            CliError::Core(E::Config { .. } | E::InvalidModel(_)) => exit::CONFIG,
            CliError::Core(_) => exit::NUMERIC,
            CliError::Output { .. } | CliError::Io(_) | CliError::Csv(_) => exit::IO,
        }
    }
}
