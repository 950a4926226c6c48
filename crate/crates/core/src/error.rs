use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {format} image {path}: {reason}")]
    Decode {
        path: PathBuf,
        format: String,
        reason: String,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("degenerate kernel: no eigenvalue above {0:e}")]
    DegenerateKernel(f64),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("feature dictionary mismatch: {0}")]
    DictionaryMismatch(String),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("ingestion error: {0}")]
    Ingest(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short identifier used in machine-parsable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Decode { .. } => "decode",
            Error::Argument(_) => "argument",
            Error::DegenerateMatrix(_) => "degenerate_matrix",
            Error::DegenerateKernel(_) => "degenerate_kernel",
            Error::Divergence { .. } => "divergence",
            Error::Solver(_) => "solver",
            Error::DictionaryMismatch(_) => "dictionary_mismatch",
            Error::Parse { .. } => "parse",
            Error::SchemaVersion { .. } => "schema_version",
            Error::Ingest(_) => "ingest",
            Error::Config(_) => "config",
            Error::Serde(_) => "serde",
        }
    }
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
