use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{0} is not a prime")]
    NotPrime(u64),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("index ({row}, {col}) out of range for dimension {dim}")]
    IndexOutOfRange { row: usize, col: usize, dim: usize },

    #[error("window rows {rows:?} x cols {cols:?} exceeds dimension {dim}")]
    WindowOutOfRange {
        rows: (usize, usize),
        cols: (usize, usize),
        dim: usize,
    },

    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NonSquare { rows: usize, cols: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget exceeded: need {needed}, budget is {budget}")]
    BudgetExceeded { needed: String, budget: String },

    #[error("position lies in level {level}, beyond the maximum level {max_level}")]
    LevelBudgetExceeded { level: u32, max_level: u32 },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("precision too large: {0}")]
    PrecisionTooLarge(String),

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("no exception-free starting point found: {0}")]
    NoExceptionFreeZone(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
