use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension must be at least 1")]
    EmptyDimension,

    #[error("state is not normalized: |norm^2 - 1| = {deviation:e}")]
    NotNormalized { deviation: f64 },

    #[error("state has zero norm")]
    ZeroState,

    #[error("spectrum is degenerate: minimum eigenvalue gap {gap:e} below {threshold:e}")]
    DegenerateSpectrum { gap: f64, threshold: f64 },

    #[error("eigenbasis is not unitary: max deviation {deviation:e}")]
    NonUnitaryBasis { deviation: f64 },

    #[error("matrix is not Hermitian: max deviation {deviation:e}")]
    NonHermitian { deviation: f64 },

    #[error("negative variance radicand {radicand:e}: numerical corruption")]
    NegativeVariance { radicand: f64 },

    #[error("particle count must be at least 1")]
    EmptyEnsemble,

    #[error("particle count mismatch: ensemble has {ensemble}, observable/config has {other}")]
    CountMismatch { ensemble: usize, other: usize },

    #[error("enumeration of {required} items exceeds budget {budget}")]
    EnumerationBudget { required: u128, budget: u128 },

    #[error("invalid pointer grid: {0}")]
    InvalidGrid(String),

    #[error("pointer profile does not fit the grid: {0}")]
    ProfileDoesNotFit(String),

    #[error("pointer shift range [{low}, {high}] leaves the grid of extent {extent}")]
    GridOverflow { low: f64, high: f64, extent: f64 },

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("post-selection overlap {overlap:e} below floor {floor:e}")]
    OverlapBelowFloor { overlap: f64, floor: f64 },

    #[error("spectra span rank {rank}, need {required}: uniqueness cannot be certified")]
    InsufficientSpectra { rank: usize, required: usize },

    #[error("coupling is zero: no measurement took place")]
    DegenerateCoupling,

    #[error("{quantity} is non-positive ({value:e}) at N = {count}; not fitted")]
    NonPositiveValue {
        quantity: String,
        count: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
