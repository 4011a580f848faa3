use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The experiment file is malformed or violates an invariant.
    #[error("{}", render_config(.path, *.line, *.column, .message))]
    Config {
        path: PathBuf,
        /// 1-based position of the offending entry, when known.
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    /// Bad command-line usage that the argument parser cannot catch.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] msgamp::Error),
}

fn render_config(path: &std::path::Path, line: Option<usize>, column: Option<usize>, message: &str) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("{}:{l}:{c}: {message}", path.display()),
        (Some(l), None) => format!("{}:{l}: {message}", path.display()),
        _ => format!("{}: {message}", path.display()),
    }
}

impl HarnessError {
    /// Process exit code: 2 for usage and configuration errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::Usage(_) => 2,
            HarnessError::Core(msgamp::Error::Config { .. }) => 2,
            _ => 1,
        }
    }

    /// `map_err` adapter attaching `path` to an I/O error.
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
