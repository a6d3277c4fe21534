use thiserror::Error;

/// Errors produced by dataset handling, model fitting, and interval search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("target column {0:?} not found in header")]
    MissingTargetColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has {n} rows, need at least {min}")]
    TooFewRows { n: usize, min: usize },

    #[error("row {row} has {got} columns, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFiniteValue { row: usize, column: String },

    #[error("query has {got} features, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },

    #[error("query contains a non-finite value at position {0}")]
    NonFiniteQuery(usize),

    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTestFraction(f64),

    #[error("split of {n} rows with test fraction {fraction} leaves a degenerate side")]
    DegenerateSplit { n: usize, fraction: f64 },

    #[error("target values are constant, cannot standardize")]
    ConstantTargets,

    #[error("miscoverage level must satisfy 0 <= alpha < 1, got {0}")]
    InvalidAlpha(f64),

    #[error("quantile level must lie in [0, 1], got {0}")]
    InvalidQuantileLevel(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("interval bounds are inverted: lower {lower} > upper {upper}")]
    InvertedInterval { lower: f64, upper: f64 },

    #[error("model file has format version {got}, this build reads version {supported}")]
    UnsupportedFormatVersion { got: u32, supported: u32 },

    #[error("model file is inconsistent: {0}")]
    CorruptModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
