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

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("evaluation references unknown text_id {text_id:?}")]
    DanglingReference { text_id: String },

    #[error("mixed payload kinds: {0}")]
    MixedPayload(String),

    #[error("duplicate evaluation of text {text_id:?} by reader {reader_id:?}")]
    DuplicateEvaluation { reader_id: String, text_id: String },

    #[error("metric {metric}: {reason}")]
    Metric { metric: &'static str, reason: String },

    #[error("degenerate reader {0}: all raw scores are equal")]
    DegenerateReader(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Process exit status for the command-line frontend: 3 for validation
    /// failures, 4 for insufficient or degenerate data, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::DanglingReference { .. }
            | Error::MixedPayload(_)
            | Error::DuplicateEvaluation { .. }
            | Error::Metric { .. }
            | Error::Dimension { .. }
            | Error::Invalid(_) => 3,
            Error::InsufficientData(_) | Error::SingleClass | Error::DegenerateReader(_) | Error::Degenerate(_) => 4,
            Error::Io { .. } => 1,
        }
    }

    pub(crate) fn metric(metric: &'static str, reason: impl Into<String>) -> Self {
        Error::Metric {
            metric,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
