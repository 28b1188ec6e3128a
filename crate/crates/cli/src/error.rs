use std::path::{Path, PathBuf};

use thiserror::Error;

/// Exit status when every verdict passes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
/// A verdict failed or a solver did not certify.
pub const EXIT_FAIL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Solver(#[from] regdual::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use regdual::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Solver(e) => match e {
                E::Io(_) => EXIT_IO,
                E::Singular(_) | E::NotConverged { .. } | E::Lp(_) => EXIT_FAIL,
                _ => EXIT_CONFIG,
            },
        }
    }
}
