use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot:e} at column {column}")]
    NotPositiveDefinite { column: usize, pivot: f64 },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("markov order {order} too large for {p} vertices (need 1 <= order < p/2)")]
    OrderTooLarge { p: usize, order: usize },

    #[error("too few states ({m}) for the {scheme} stencil, need at least {min}")]
    TooFewStates {
        m: usize,
        min: usize,
        scheme: &'static str,
    },

    #[error("autoregressive coefficient {0} is not stationary (|phi| must be < 1)")]
    NonStationary(f64),

    #[error("unstable Euler step: dt={dt} must satisfy 0 < dt < kappa={kappa}")]
    UnstableStep { dt: f64, kappa: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("grid of {cells} cells exceeds the dense oracle limit of {limit}")]
    GridTooLargeForOracle { cells: usize, limit: usize },

    #[error("degenerate element {element}: area {area:e}")]
    DegenerateElement { element: usize, area: f64 },

    #[error("row {row} has {predictors} active predictors but only {members} members")]
    UnderdeterminedRow {
        row: usize,
        predictors: usize,
        members: usize,
    },

    #[error("row {row} has (near) zero residual variance: ensemble collapse")]
    ZeroResidual { row: usize },

    #[error("regression of row {row} has a singular design")]
    SingularDesign { row: usize },

    #[error("least squares needs more members ({members}) than features ({features})")]
    Underdetermined { members: usize, features: usize },

    #[error("MDA weights must be positive and sum to one (sum = {sum})")]
    WeightsNotNormalised { sum: f64 },

    #[error("innovation covariance is singular ({observations} observations, {members} members)")]
    SingularInnovationCovariance { observations: usize, members: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
