use std::path::PathBuf;

use crate::data::MethodId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{column}` not found in header")]
    MissingColumn { column: String },

    #[error("row {row}, column `{column}`: cannot parse {value:?} as a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: value is not finite")]
    NonFinite { row: usize, column: String },

    #[error("{n} observations is too few: at least {required} are needed for this model")]
    TooFewObservations { n: usize, required: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design matrix is rank deficient at column {column}")]
    Singular { column: usize },

    #[error("empty input")]
    Empty,

    #[error("order statistic {k} out of range for {len} values")]
    IndexOutOfRange { k: usize, len: usize },

    #[error("residual scale is degenerate (zero spread)")]
    DegenerateScale,

    #[error("{zeros} of {n} residuals are exactly zero; the M-scale is not defined")]
    TooManyZeroResiduals { zeros: usize, n: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("unknown method `{0}` (expected one of: {list})", list = MethodId::names().join(", "))]
    UnknownMethod(String),

    #[error("observation in row {row} has leverage 1; leverage weights are undefined")]
    ExactLeverage { row: usize },

    #[error("only {retained} observations retained, {required} needed")]
    TooFewRetained { retained: usize, required: usize },

    #[error("every elemental subset is degenerate")]
    AllSubsetsDegenerate,

    #[error("n = {n} exceeds the limit of {max} for pairwise residual differences")]
    TooLarge { n: usize, max: usize },

    #[error("input is not sorted in ascending order")]
    Unsorted,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("method {method} failed on {failed} of {replicates} replicates")]
    ScenarioFailure {
        method: MethodId,
        failed: usize,
        replicates: usize,
    },
}
