use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("backward called on {0} without a preceding forward pass")]
    BackwardWithoutForward(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("{path} requires the {modality} modality, which this subject lacks")]
    MissingModality {
        path: &'static str,
        modality: &'static str,
    },

    #[error("no usable modality")]
    NoUsableModality,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("subject {id}: {reason}")]
    Subject { id: String, reason: String },

    #[error("{0}")]
    Data(String),

    #[error("AUC undefined: {0}")]
    AucUndefined(&'static str),

    #[error("score sets are misaligned: {0}")]
    Misaligned(String),

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn subject(id: &str, reason: impl Into<String>) -> Self {
        Error::Subject {
            id: id.to_owned(),
            reason: reason.into(),
        }
    }

    /// Broad category used by front-ends to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Config,
            Error::Schema { .. }
            | Error::Subject { .. }
            | Error::Data(_)
            | Error::Misaligned(_)
            | Error::Artifact(_)
            | Error::Io { .. }
            | Error::Json(_)
            | Error::MissingModality { .. }
            | Error::NoUsableModality
            | Error::AucUndefined(_) => ErrorKind::Data,
            Error::NonFinite(_) | Error::NonFiniteLoss { .. } => ErrorKind::Numeric,
            Error::DimensionMismatch { .. } | Error::BackwardWithoutForward(_) => {
                ErrorKind::Contract
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
    Contract,
}
