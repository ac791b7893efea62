use std::io;
use std::path::{Path, PathBuf};

use fixwing_core::scenario::ConfigError;
use fixwing_core::RunError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot {action} {}: {source}", .path.display())]
    Io {
        action: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{}: {message}", .path.display())]
    Csv { path: PathBuf, message: String },
    #[error("every sweep point failed")]
    SweepFailed,
}

impl CliError {
    /// 1 for an infeasible scenario, 2 for usage and I/O problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(RunError::Infeasible { .. }) | CliError::SweepFailed => 1,
            _ => 2,
        }
    }
}

pub fn io_err<'a>(action: &'static str, path: &'a Path) -> impl FnOnce(io::Error) -> CliError + 'a {
    move |source| CliError::Io {
        action,
        path: path.to_path_buf(),
        source,
    }
}
