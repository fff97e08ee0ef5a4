use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed user data. `index` points at the offending entry when one exists.
    #[error("invalid input{}: {reason}", index.map(|i| format!(" at entry {i}")).unwrap_or_default())]
    InvalidInput { index: Option<usize>, reason: String },

    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("index {index} out of range (valid: 0..{len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("cache size {cache} is outside the exactly-optimal regime, which starts at {threshold}")]
    OutOfRegime { cache: f64, threshold: f64 },

    #[error("exact enumeration needs {required} evaluations but the budget is {budget}; enable Monte Carlo sampling")]
    BudgetExceeded { required: f64, budget: u64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    /// A scheme produced an output that contradicts its own guarantees
    /// (undecodable file, certificate breach).
    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::InvariantViolation(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
