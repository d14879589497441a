//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with inconsistent dimensions or an invalid
    /// structural precondition (contract violation).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A parameter is outside its legal range (e.g. SOR relaxation ω ∉ (0,2)).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A triangular solve met a zero diagonal entry.
    #[error("singular triangular system: zero diagonal at row {0}")]
    SingularTriangular(usize),

    /// A Cholesky factorization met a non-positive pivot.
    #[error("matrix is not positive definite: non-positive pivot at row {0}")]
    NotPositiveDefinite(usize),

    /// The noise covariance Mᵀ + N of a splitting sampler is not SPD; the
    /// corresponding sampler does not converge.
    #[error("noise covariance Mᵀ+N is not positive definite: {0}")]
    NoiseCovarianceNotSpd(String),

    /// A Chebyshev sampler noise coefficient left the valid range.
    #[error("noise coefficient breakdown at iteration {k}: a = {a}, b = {b}")]
    CoefficientBreakdown { k: usize, a: f64, b: f64 },

    /// A configured memory or size cap would be exceeded.
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    /// An iterative numeric procedure failed to converge or broke down.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A model constructor produced an invalid matrix.
    #[error("model assembly error: {0}")]
    ModelAssembly(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
