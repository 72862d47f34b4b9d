use thiserror::Error;

/// Errors raised by models, engines, oracles and the optimizer.
///
/// Variants split into two families: invalid input (`Invalid*`, `IndexOutOfBounds`)
/// and numerical refusals (grid too coarse, non-decaying tables, indefinite
/// covariances). Callers map the first family to validation failures and the
/// second to refusals.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel index out of bounds: {what}")]
    IndexOutOfBounds { what: String },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("time grid too coarse ({key}): {reason}")]
    GridTooCoarse { key: String, reason: String },

    #[error("response table does not decay to zero (last/peak = {ratio:.3e}); refusing spectral transform")]
    NonDecayingResponse { ratio: f64 },

    #[error("covariance is not positive semidefinite after embedding (minimum eigenvalue {min_eigenvalue:.3e})")]
    IndefiniteCovariance { min_eigenvalue: f64 },

    #[error("qubit flip target undefined: binary distance is {distance}, expected 1")]
    NotSingleFlip { distance: u32 },

    #[error("all {starts} optimizer starts failed: {diagnostics:?}")]
    OptimizationFailed { starts: usize, diagnostics: Vec<String> },
}

impl Error {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { key: key.into(), reason: reason.into() }
    }

    pub fn coarse(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::GridTooCoarse { key: key.into(), reason: reason.into() }
    }

    /// True for refusals caused by numerics rather than malformed input.
    pub fn is_numerical_refusal(&self) -> bool {
        matches!(
            self,
            Error::GridTooCoarse { .. }
                | Error::NonDecayingResponse { .. }
                | Error::IndefiniteCovariance { .. }
                | Error::OptimizationFailed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
