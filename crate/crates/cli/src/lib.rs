//! File formats, CSV reports and subcommands behind the `hashlookup` binary.

use std::path::PathBuf;

pub mod commands;
pub mod formats;
pub mod report;

pub use commands::{run, Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] hashlookup_core::Error),
}

impl CliError {
    /// 2 for bad input, 3 when the probe budget would be exceeded.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(hashlookup_core::Error::ProbeBudgetExceeded { .. }) => 3,
            _ => 2,
        }
    }
}
