//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the calibration pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix could not be Cholesky-factorized, even with the given jitter.
    #[error("matrix of dim {dim} is not positive definite (jitter {jitter:.3e})")]
    NotPositiveDefinite { dim: usize, jitter: f64 },

    /// Vector/matrix dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Probability vector has negative entries or does not sum to one.
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),

    /// A scalar or structural parameter is out of its allowed range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Monte Carlo covariance stayed singular after the full jitter ladder.
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    /// Two mass sets are in (numerically) total conflict.
    #[error("total conflict between mass sets (C = {0})")]
    TotalConflict(f64),

    /// Conflict detection requires non-zero gradients.
    #[error("zero gradient passed to conflict detection")]
    ZeroGradient,

    /// Synthetic data specification failed validation or its probe check.
    #[error("invalid synthetic spec: {0}")]
    SpecInvalid(String),

    /// A training-loop failure, annotated with the step it occurred at.
    #[error("at training step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// Report file contents did not match the expected row layout.
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

impl Error {
    /// Attach a training step index to an error bubbling out of the loop.
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn invalid_param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
