use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{what} of {requested} exceeds the cap of {cap}")]
    TooLarge {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("matrix is not Hermitian (max |A_ij - conj(A_ji)| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("inadmissible configuration: {0}")]
    Config(String),

    #[error("vector norm {norm} exceeds the bound R = {bound}")]
    NormBound { norm: f64, bound: f64 },

    #[error("eigenphase {phase} is within the wrap guard of ±π")]
    PhaseWrap { phase: f64 },

    #[error("unresolved eigenvalue band: {0}")]
    UnresolvedBand(String),

    #[error("privacy budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
