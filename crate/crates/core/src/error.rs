use thiserror::Error;

/// Errors raised by validation and numerical routines across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operator has non-finite entries")]
    NonFinite,
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    NotUnitTrace(f64),
    #[error("state vector norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("operator is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("invalid measurement family: {0}")]
    InvalidFamily(String),
    #[error("invalid event schedule: {0}")]
    InvalidSchedule(String),
    #[error("no branch propagator for gap {gap} under prefix {prefix:?}")]
    MissingBranchPropagator { gap: usize, prefix: Vec<usize> },
    #[error("initial and final states are orthogonal (tr(rho_f rho_i) = {overlap:.3e})")]
    OrthogonalEndpoints { overlap: f64 },
    #[error("time step too large: no-jump effect operator has eigenvalue {min_eigenvalue:.3e}")]
    StepTooLarge { min_eigenvalue: f64 },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("Lindblad generator has {null_dimension} stationary states, expected exactly one")]
    DegenerateFixedPoint { null_dimension: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("internal identity check failed: {0}")]
    IdentityViolation(String),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
