use thiserror::Error;

/// Errors raised by the fitting, relaxation and certification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid weight at index {index}: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weight count {got} does not match dataset size {expected}")]
    WeightCount { expected: usize, got: usize },
    #[error("degenerate normal")]
    DegenerateNormal,
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("invalid Gamma structure: {0}")]
    InvalidGamma(String),
    #[error("degenerate SDP solution")]
    DegenerateSdpSolution,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("too many points for the SDP path: {got} > {max}")]
    TooManyPoints { max: usize, got: usize },
}

impl Error {
    /// True for errors caused by the input or the requested settings, as
    /// opposed to a numerical breakdown.
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::DegenerateNormal
                | Error::NotSymmetric(_)
                | Error::InvalidGamma(_)
                | Error::DegenerateSdpSolution
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
