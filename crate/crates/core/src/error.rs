use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: truncation must be at least 2")]
    InvalidDimension { dim: usize },

    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("truncation too small: |alpha|^2 = {mean_photons} leaves tail {tail:e} at dim {dim}")]
    TruncationTooSmall {
        mean_photons: f64,
        dim: usize,
        tail: f64,
    },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("corrupt state: {0}")]
    CorruptState(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("integration produced non-finite entries at tau = {tau}; reduce the step size")]
    StepSize { tau: f64 },

    #[error("quantum Fisher information is zero: the variance bound is unbounded")]
    UnboundedVariance,

    #[error(
        "no sign change of the extremum equation on [{lo}, {hi}] (coefficients {coefficients:?})"
    )]
    BracketFailure {
        lo: f64,
        hi: f64,
        coefficients: [f64; 4],
    },

    #[error("no grid point satisfies D <= {epsilon} (smallest D found {min_deformation})")]
    Infeasible { epsilon: f64, min_deformation: f64 },

    #[error("degenerate candidate set: {0}")]
    DegenerateCandidates(String),

    #[error("trajectory integration failed at step {step}: {reason}")]
    IntegrationFailure { step: usize, reason: String },

    #[error("posterior renormalisation failed at step {step}")]
    RenormalizationFailure { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
