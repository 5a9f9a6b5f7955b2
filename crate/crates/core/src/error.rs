use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index count {count} exceeds the budget of {budget} indices")]
    BudgetExceeded { count: u128, budget: u64 },

    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("embedding is not compact: t = {t} must exceed (1/p1 - 1/p2)_+ = {threshold}")]
    NotCompact { t: f64, threshold: f64 },

    #[error("infeasible free parameter: {0}")]
    Infeasible(String),

    #[error("index {n} out of range 1..={max}")]
    IndexOutOfRange { n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("uncovered case: {0}")]
    UncoveredCase(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("degenerate samples: {0}")]
    Degenerate(String),

    #[error("operator is not invertible")]
    NotInvertible,
}

pub type Result<T> = std::result::Result<T, Error>;
