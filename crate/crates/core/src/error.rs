use thiserror::Error;

/// Errors raised by the arithmetic and construction layers.
///
/// Negative mathematical outcomes (a basis that is not separated, a failed
/// hypothesis in a report) are values, not errors; these variants cover the
/// situations where an operation cannot produce a meaningful answer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("rank mismatch: expected ({expected_main}, {expected_inf}), got ({got_main}, {got_inf})")]
    RankMismatch {
        expected_main: usize,
        expected_inf: usize,
        got_main: usize,
        got_inf: usize,
    },

    #[error("division by zero")]
    DivisionByZero,

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("infinite valuation (exact zero)")]
    InfiniteValuation,

    #[error("element has negative valuation; not in the valuation ring")]
    NotInValuationRing,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("input vectors are not linearly independent over the base")]
    NotIndependent,

    #[error("hypothesis violation: {}", .0.join("; "))]
    HypothesisViolation(Vec<String>),

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            column,
            message: message.into(),
        }
    }
}
