use std::io;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left} vs {right}")]
    DimensionMismatch {
        op: &'static str,
        left: String,
        right: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("malformed {kind} file: {reason}")]
    Format { kind: &'static str, reason: String },
    #[error("unknown record id `{0}`")]
    UnknownId(String),
    #[error("labels are required but missing")]
    MissingLabels,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(op: &'static str, left: impl ToString, right: impl ToString) -> Error {
    Error::DimensionMismatch {
        op,
        left: left.to_string(),
        right: right.to_string(),
    }
}
