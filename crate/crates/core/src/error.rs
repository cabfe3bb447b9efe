use thiserror::Error;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("correlation matrix is numerically singular even with jitter {jitter:e}")]
    FactorizationFailure { jitter: f64 },

    #[error("observations carry no scale information (all values identical)")]
    DegenerateData,

    #[error("expected improvement needs more than 1 degree of freedom, got {dof}")]
    DofTooLow { dof: f64 },

    #[error("every particle weight vanished")]
    AllWeightsZero,

    #[error("particle cloud covariance is singular")]
    DegenerateCloud,

    #[error("weighted sample has zero total weight")]
    EmptySample,

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("every candidate of the fixed design has already been evaluated")]
    ExhaustedCandidates,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("failed to parse histogram: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
