//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible tensor shapes; the message names both shapes.
    #[error("shape mismatch in {context}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        context: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("axis {axis} out of range for rank-{rank} tensor")]
    AxisOutOfRange { axis: usize, rank: usize },

    #[error("{context}: expected a scalar, got shape {shape:?}")]
    NotScalar {
        context: &'static str,
        shape: Vec<usize>,
    },

    #[error("variable does not belong to this tape")]
    NotOnTape,

    /// Statistical estimator preconditions (sample counts, degenerate inputs).
    #[error("estimator undefined: {0}")]
    EstimatorUndefined(String),

    /// Regularizer cannot be evaluated on this batch (e.g. singular covariance).
    #[error("regularizer degenerate: {0}")]
    RegularizerDegenerate(String),

    /// Invalid configuration value; names the offending field.
    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Malformed binary file (IDX, latent dump, checkpoint).
    #[error("format error in {what}: {reason}")]
    Format { what: &'static str, reason: String },

    /// NaN or infinity where a finite value is required.
    #[error("non-finite values in {context}")]
    NonFinite { context: &'static str },

    /// Training aborted because the loss became non-finite.
    #[error("training diverged at epoch {epoch}, step {step}: loss = {value}")]
    Diverged {
        epoch: usize,
        step: usize,
        value: f64,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(context: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::ShapeMismatch {
            context,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
