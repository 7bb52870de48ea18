use std::path::PathBuf;

use crate::dataset::{PatientId, SampleId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration value or config file.
    #[error("config error: {0}")]
    Config(String),

    /// A malformed row in a dataset file. Lines are 1-based, the header is line 1.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("patient {0} appears in both the pool and the test split")]
    Disjointness(PatientId),

    #[error("dimension error at line {line}: expected {expected} features, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },

    /// A split or sample that violates a dataset invariant.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("cannot read dataset {path}: {source}")]
    DataIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown sample id {0}")]
    UnknownSample(SampleId),

    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// An internal bookkeeping check failed during a trial.
    #[error("runtime error: {0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the CLI: 1 config, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Parse { .. }
            | Error::Disjointness(_)
            | Error::Dimension { .. }
            | Error::InvalidData(_)
            | Error::DataIo { .. } => 2,
            Error::UnknownSample(_)
            | Error::Usage(_)
            | Error::Runtime(_)
            | Error::Io(_)
            | Error::Csv(_) => 3,
        }
    }
}
