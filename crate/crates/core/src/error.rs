use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("index out of range: {0}")]
    Range(String),

    #[error("metric is undefined: {0}")]
    UndefinedMetric(String),

    #[error("no threshold produced any alarm; the curve is empty")]
    EmptyCurve,

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("model fit failed: {0}")]
    Fit(String),

    #[error("invalid model state: {0}")]
    State(String),

    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}
