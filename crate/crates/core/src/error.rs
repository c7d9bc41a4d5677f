use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("line {line}: price must be positive, got {price}")]
    NonPositivePrice { line: usize, price: f64 },

    #[error("duplicate date {date}")]
    DuplicateDate { date: NaiveDate },

    #[error("series is empty")]
    EmptySeries,

    #[error("series `{left}` and `{right}` share no dates")]
    EmptyIntersection { left: String, right: String },

    #[error("series length {len} is shorter than the window size n = {n}")]
    SeriesTooShort { len: usize, n: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration of {count} paths exceeds the guard of {limit}")]
    EnumerationGuard { count: u128, limit: u64 },

    #[error("plan error: {0}")]
    Plan(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
