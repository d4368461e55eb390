use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command-line front end to pick an exit
/// code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("duplicate key: series '{series_id}' has more than one row at {timestamp}")]
    DuplicateKey { series_id: String, timestamp: String },

    #[error("type error at line {line}, column '{column}': cannot parse '{value}' as a number")]
    Type {
        line: usize,
        column: String,
        value: String,
    },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric guard in series '{series}' at t={t}: {what}")]
    NumericGuard {
        series: String,
        t: usize,
        what: String,
    },

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: String, index: usize },

    #[error("{metric}: zero denominator at index {index}")]
    DivisionGuard { metric: &'static str, index: usize },

    #[error("loss has no unmasked observations")]
    EmptyLoss,

    #[error("rank-deficient design: collinear lag columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("unsupported operation: {0}")]
    Capability(String),

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidArgument(_) | Error::Capability(_) => ErrorCategory::Config,
            Error::NumericGuard { .. }
            | Error::NonFinite { .. }
            | Error::EmptyLoss
            | Error::DivisionGuard { .. }
            | Error::RankDeficient { .. } => ErrorCategory::Numeric,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyInput(_)
            | Error::DuplicateKey { .. }
            | Error::Type { .. }
            | Error::Schema(_)
            | Error::Serialization(_)
            | Error::Csv(_) => ErrorCategory::Data,
        }
    }
}
