use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, found {found})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// The constraint covariance matrix is singular or too badly conditioned
    /// to be inverted reliably.
    #[error("ill-conditioned constraints: min eigenvalue {min_eigenvalue:e}, condition number {condition:e}")]
    IllConditioned { min_eigenvalue: f64, condition: f64 },

    #[error("unsupported moment order {0} (at most {max} indices)", max = crate::conditioning::MAX_WICK_ORDER)]
    UnsupportedOrder(usize),

    #[error("degenerate constraints: kernel rows are linearly dependent (rank {rank} < {rows})")]
    DegenerateConstraints { rank: usize, rows: usize },

    #[error("invalid initial state: {0}")]
    InvalidInit(String),

    #[error("proposal tuning failed: acceptance rate {rate:.3} outside [{lo}, {hi}] (final width {width:e})")]
    Tuning {
        rate: f64,
        lo: f64,
        hi: f64,
        width: f64,
    },

    #[error("invalid covariance profile: {0}")]
    InvalidProfile(String),

    #[error("time step {dt:e} violates the stability bound {bound:e}")]
    InvalidDt { dt: f64, bound: f64 },

    #[error("integration diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
