//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the numeric and model-fitting layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Cholesky factorization hit a non-positive pivot: the matrix is not
    /// positive definite (within the pivot tolerance).
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    /// An argument fell outside the mathematical domain of the function.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A binary variable is constant (all 0 or all 1) and carries no
    /// information for threshold or correlation estimation.
    #[error("degenerate margin: column {column} is constant ({value})")]
    DegenerateMargin { column: usize, value: u8 },

    /// The estimating-equation Jacobian of the threshold/correlation system
    /// is numerically singular; no asymptotic covariance can be formed.
    #[error("singular sandwich Jacobian (condition estimate {cond:.3e})")]
    SingularSandwich { cond: f64 },

    /// The WLS weight matrix (inverse asymptotic covariance) could not be
    /// formed: the asymptotic covariance is singular or too ill-conditioned.
    #[error("singular weight matrix: {msg}")]
    SingularWeight { msg: String },

    /// A weighted fit was requested but no asymptotic covariance was attached
    /// to the tetrachoric summary.
    #[error("estimator {estimator} requires an asymptotic covariance; none was computed")]
    MissingAcov { estimator: &'static str },

    /// A delta loading with squared value >= 1 has no finite theta counterpart.
    #[error("loading {lambda} has magnitude >= 1; no finite theta-parameterized equivalent")]
    HeywoodConversion { lambda: f64 },

    /// An iterative fit exhausted its iteration budget while still moving.
    #[error("{what} did not converge within {iterations} iterations")]
    Nonconvergence { what: &'static str, iterations: usize },

    /// Structural problem with an input dataset or matrix.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }
}
