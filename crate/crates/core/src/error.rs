use thiserror::Error;

/// Everything that can go wrong in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("state trace {0} differs from 1")]
    NotNormalized(f64),

    #[error("mixture is singular (smallest eigenvalue {0:e}); no Cholesky factor with nonzero determinant")]
    SingularMixture(f64),

    #[error("POVM element has trace {0:e}, retrodiction undefined")]
    ZeroTraceElement(f64),

    #[error("Gauss-Hermite quadrature did not resolve the top-corner element (estimated error {0:e})")]
    QuadratureUnderresolved(f64),

    #[error("Laguerre series remainder bound {0:e} exceeds 1e-10")]
    SeriesNotConverged(f64),

    #[error("unread mixture differs from identity/D by {0:e}")]
    NotMaximallyMixed(f64),

    #[error("outcome {0} has zero total probability over all preparations")]
    UnreachableOutcome(usize),

    #[error("heralding outcome has probability {0:e}")]
    ZeroSuccessProbability(f64),

    #[error("Fock truncation leaks {0:e} of the norm")]
    TruncationLeakage(f64),

    #[error("POVM completeness residual {0:e} exceeds 1e-8")]
    IncompletePovm(f64),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
