use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("table has no data rows")]
    EmptyTable,
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("label column `{column}` must have exactly 2 distinct values, found {found}")]
    LabelCardinality { column: String, found: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("confidence parameter must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("successes ({successes}) exceed trials ({trials})")]
    InvalidCounts { successes: u64, trials: u64 },
    #[error("feature pair must consist of two distinct features, got ({0}, {0})")]
    SameFeature(usize),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("feature has an empty alphabet")]
    EmptyAlphabet,
    #[error("label budget {budget} exceeds the {available} available examples")]
    BudgetExceedsPool { budget: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("at least one label is required")]
    NoLabels,
    #[error("ground-truth labels are not available for this dataset")]
    MissingGroundTruth,
    #[error("label oracle aborted: {0}")]
    OracleAborted(String),
}
