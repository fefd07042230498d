use thiserror::Error;

use crate::npml::MixtureFit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Response shape does not match the cohort family, or counts are invalid.
    #[error("schema error: {0}")]
    Schema(String),

    #[error("need at least {needed} units, got {got}")]
    TooFewUnits { needed: usize, got: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid ordering: {0}")]
    Ordering(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// EM hit its iteration cap; the best fit found so far is attached.
    #[error("EM did not converge after {} iterations", .fit.iterations)]
    EmNotConverged { fit: Box<MixtureFit> },

    #[error("optimizer did not converge: {0}")]
    NotConverged(String),

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("non-finite value during evaluation: {0}")]
    NonFinite(String),

    #[error("fits come from different cohorts")]
    CohortMismatch,

    #[error("unknown embedded cohort `{0}`")]
    UnknownCohort(String),

    /// Input file problems, reported with the 1-based line number.
    #[error("line {line}: {message}")]
    Input { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for data problems, 3 for convergence failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmNotConverged { .. } | Error::NotConverged(_) => 3,
            Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}
