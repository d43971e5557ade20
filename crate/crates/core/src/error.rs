use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: unknown tower_id {tower_id:?}")]
    UnknownTower { line: usize, tower_id: String },

    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),

    #[error("negative value {value} at ({row}, {column})")]
    NegativeValue {
        row: String,
        column: String,
        value: f64,
    },

    #[error("empty result: {0}")]
    Empty(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("rank deficient design; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("logit did not converge: {0}")]
    Separation(String),

    #[error("eigen decomposition: {0}")]
    Eigen(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn malformed(line: usize, msg: impl Into<String>) -> Self {
        Error::Malformed {
            line,
            message: msg.into(),
        }
    }

    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Malformed { .. }
                | Error::UnknownTower { .. }
                | Error::DuplicateLabel(_)
                | Error::NegativeValue { .. }
                | Error::Invalid(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        Error::malformed(line, e.to_string())
    }
}
