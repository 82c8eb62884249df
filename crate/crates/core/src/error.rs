use thiserror::Error;

/// Errors raised by the estimation and testing pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design must satisfy n >= p >= 1 (n = {n}, p = {p})")]
    InvalidShape { n: usize, p: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("column {0} of the design is identically zero")]
    ZeroColumn(usize),

    #[error("design is rank deficient (triangular factor ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("normalized Gram matrix R(0) is numerically singular")]
    SingularR0,

    #[error("series is empty")]
    EmptySeries,

    #[error("lag {lag} out of range for sample size {n}")]
    LagOutOfRange { lag: usize, n: usize },

    #[error("series has zero variance; bandwidth cannot be chosen from its autocovariances")]
    DegenerateSeries,

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),

    #[error(
        "covariance estimate has non-positive variance {value:.3e} for coefficient {index}; \
         retry with the bartlett kernel, which always yields a positive semi-definite estimate"
    )]
    NonPositiveVariance { index: usize, value: f64 },

    #[error(
        "covariance matrix is not positive definite (eigenvalue {eigenvalue:.3e}); \
         retry with the bartlett kernel, which always yields a positive semi-definite estimate"
    )]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("coefficient index {index} out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("empty index set")]
    EmptyIndexSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
