use alloc::string::String;
use alloc::vec::Vec;

/// Failures reported by a [`TargetDensity`](crate::targets::TargetDensity).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TargetError {
    #[error("coordinate {index} is outside the support of the target")]
    OutOfSupport { index: usize },
    #[error("log-density or gradient is not finite")]
    NonFinite,
    #[error("invalid model data: {0}")]
    InvalidData(String),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric positive definite (Cholesky failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Target(#[from] TargetError),
    /// Non-finite density or gradient reached by the integrator. `step` is
    /// 1-based within the trajectory being simulated.
    #[error("leapfrog trajectory diverged at step {step}")]
    Divergence { step: usize, theta: Vec<f64> },
    #[error("empty sample set")]
    Empty,
    #[error("degenerate estimator: {0}")]
    Degenerate(String),
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
