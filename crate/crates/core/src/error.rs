use thiserror::Error;

/// Errors produced by the integrator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension {dim} exceeds the quadrature oracle limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("non-finite integrand value at {at:?}")]
    NonFinite { at: Vec<f64> },

    /// The quadratic form has a kernel that the boundary conditions do not remove.
    #[error("zero mode: operator is singular with {} kernel vector(s)", basis.len())]
    ZeroMode { basis: Vec<Vec<f64>> },

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("value {0} lies on the branch cut of the principal logarithm")]
    BranchCut(String),

    #[error("pole of the gamma function at alpha = {0}")]
    GammaPole(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by a vanishing {0}")]
    Vanishing(&'static str),

    #[error("limit failed to stabilise: {0}")]
    Divergence(String),

    #[error("truncation bound {bound:e} exceeds tolerance {tol:e}")]
    Truncation { bound: f64, tol: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("sampler failure: {0}")]
    Sampler(String),
}

pub type Result<T> = std::result::Result<T, Error>;
