use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain bounds: {0}")]
    InvalidBounds(String),

    #[error("dataset must contain at least one value")]
    EmptyDataset,

    #[error("row {row}: cannot parse {text:?} as a number")]
    Parse { row: usize, text: String },

    #[error("row {row}: expected a single column, found {columns}")]
    ColumnCount { row: usize, columns: usize },

    #[error("row {row}: value {value} lies outside the domain [{lower}, {upper}]")]
    OutOfBounds {
        row: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-finite value {0} in dataset")]
    NonFinite(f64),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("query precondition violated: {0}")]
    Precondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{regime} requires a finite {what} sensitivity, but it is unbounded for this domain")]
    UnboundedSensitivity {
        regime: &'static str,
        what: &'static str,
    },

    #[error("privacy budget exhausted: spending {requested} would raise spent budget to {would_spend}, total is {total}")]
    BudgetExhausted {
        requested: f64,
        would_spend: f64,
        total: f64,
    },

    #[error("session integrity error: {0}")]
    Integrity(String),

    #[error("unsupported session version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("dataset value {0} is not a point of the grid domain")]
    OffGrid(f64),

    #[error("unsupported for ratio verification: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
