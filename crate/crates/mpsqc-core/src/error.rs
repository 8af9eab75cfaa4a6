use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not skew-symmetric (residual {0:.3e})")]
    NotSkewSymmetric(f64),

    #[error("columns are not orthonormal (residual {0:.3e})")]
    NotOrthonormal(f64),

    #[error("matrix is not orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),

    #[error("determinant is {0:.6}, expected +1")]
    BadDeterminant(f64),

    #[error("{what} = {value} is not a power of two")]
    NotPowerOfTwo { what: &'static str, value: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("rank-deficient input: {0}")]
    RankDeficient(String),

    #[error("post-selection probability {0:.3e} is below 1e-14")]
    ZeroProbability(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
