use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate. Messages are prefixed with the module
/// that raised them so CLI diagnostics stay readable on one line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data: entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },

    #[error("data: entry {index} is not finite")]
    NonFiniteEntry { index: usize },

    #[error("data: prior sums to {0}, expected 1")]
    SumNotOne(f64),

    #[error("data: need at least 2 classes, got {0}")]
    TooFewClasses(usize),

    #[error("data: posterior ({row}, {col}) is negative ({value})")]
    NegativePosterior { row: usize, col: usize, value: f64 },

    #[error("data: posterior ({row}, {col}) is not finite")]
    NonFinitePosterior { row: usize, col: usize },

    #[error("data: posterior row {row} sums to {sum}, outside tolerance of 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },

    #[error("data: posterior matrix has no rows")]
    EmptyMatrix,

    #[error("data: row {row} has {found} columns, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("data: label {label} at position {index} is out of range for {classes} classes")]
    LabelOutOfRange { index: usize, label: usize, classes: usize },

    #[error("{context}: dimension mismatch, expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("parse: {}:{line}:{column}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("io: {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("simplex: input coordinate {index} is not finite")]
    NonFiniteInput { index: usize },

    #[error("simplex: q[{class}] = 0 while p[{class}] > 0")]
    AbsoluteContinuityViolation { class: usize },

    #[error("correction: weighted sum of row {row} underflows to zero")]
    DegenerateRow { row: usize },

    #[error("estimation: log-likelihood is -inf (row {row} has zero support under the estimate)")]
    MinusInfinity { row: usize },

    #[error("estimation: log-posterior is -inf (estimate is zero on class {class} with alpha > 1)")]
    DirichletBoundary { class: usize },

    #[error("estimation: non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("estimation: invalid config: {0}")]
    InvalidConfig(String),

    #[error("estimation: split leaves {optimization} optimization rows and {validation} validation rows")]
    SplitTooSmall { optimization: usize, validation: usize },

    #[error("evaluation: empty input")]
    EmptyInput,

    #[error("synthesis: separability must lie in (0, 1], got {0}")]
    BadSeparability(f64),

    #[error("synthesis: {0}")]
    InvalidModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
