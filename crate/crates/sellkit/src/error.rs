use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid operator spec: {0}")]
    Spec(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("target {target} outside feasible parameter interval [{lo}, {hi}]")]
    OutOfSupport { target: u64, lo: u64, hi: u64 },

    #[error("no common support: largest minimum {lo} exceeds smallest maximum {hi}")]
    NoCommonSupport { lo: u64, hi: u64 },

    #[error("cost model never crosses the dense mult-add count")]
    NoCrossover,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<String>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
