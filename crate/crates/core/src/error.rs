//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants carry enough context
//! to name the failing stage and the offending quantity without the caller
//! having to re-derive it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A measure space was constructed from invalid weights.
    #[error("invalid measure space: {0}")]
    InvalidSpace(String),

    /// Two fields were combined that do not live on the same space / rank.
    #[error("incompatible fields: {0}")]
    IncompatibleFields(String),

    /// Shape of a buffer does not match the declared space/rank.
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    /// An exponent outside [1, ∞] was requested.
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    /// An operation is only defined on a particular space kind.
    #[error("unsupported space kind: {0}")]
    UnsupportedSpace(String),

    /// Generic invalid-argument error (bad k, empty series, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A distance/norm produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// The symmetric eigensolver failed to converge.
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    /// A simulation became unstable (non-finite or unbounded state).
    #[error("simulation diverged at t = {time}: {detail}")]
    Unstable { time: f64, detail: String },

    /// Malformed input file.
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },

    /// Underlying I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A pipeline stage failed; wraps the underlying error with the stage name.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Annotate an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Convenience constructor for I/O errors carrying the path.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Convenience constructor for parse errors carrying the path.
    pub fn parse(path: impl AsRef<std::path::Path>, detail: impl Into<String>) -> Error {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
