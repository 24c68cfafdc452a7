use thiserror::Error;

/// Errors raised anywhere in the testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("sample too small: need at least {needed} observations, found {found}")]
    SampleTooSmall { needed: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("exact path enumeration needs {required} paths for n = {n}, above the cap n <= {cap}")]
    EnumerationCap { n: usize, cap: usize, required: u128 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    /// A shared stage (cost matrix, path) failed; carries its message.
    #[error("{0}")]
    Upstream(String),

    #[error("score function is not symmetric (a(i) != a(n+1-i)); pass allow_asymmetric to override")]
    AsymmetricScores,

    #[error("{what} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("null law grid of {cells} cells exceeds the budget of {budget}; use asymptotic calibration or a coarser resolution")]
    Resolution { cells: u128, budget: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for bad parameters, 2 for data
    /// problems, 3 for numeric or invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::SampleTooSmall { .. }
            | Error::NonFinite { .. }
            | Error::DimensionMismatch { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::InvalidParameter(_) | Error::OutOfRange { .. } => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
