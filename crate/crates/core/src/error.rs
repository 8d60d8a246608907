use thiserror::Error;

/// Errors produced anywhere in the lab pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index k = {k} out of range for a spectrum of length {p}")]
    IndexOutOfRange { k: usize, p: usize },

    #[error(
        "truncation of {family} cannot meet tail tolerance {tol:.1e} within p <= {cap} \
         (tail ratio at cap: {ratio:.3e})"
    )]
    TruncationCap {
        family: String,
        tol: f64,
        cap: usize,
        ratio: f64,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("root condition violated: {0}")]
    RootCondition(String),

    #[error("MA(inf) expansion did not converge within {0} terms")]
    MaTruncation(usize),

    #[error("rank deficient design: smallest singular value {smallest:.3e}, largest {largest:.3e}")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("k* is infinite: no k < p with r_k >= b n (variance lower-bound regime)")]
    KStarInfinite,

    #[error("temporal covariance of coordinate {coord} has gamma(0) = {gamma0}, expected 1")]
    NonUnitDiagonal { coord: usize, gamma0: f64 },

    #[error("replicate {index} failed: {source}")]
    Replicate { index: usize, source: Box<Error> },

    #[error("config: {0}")]
    Config(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}
