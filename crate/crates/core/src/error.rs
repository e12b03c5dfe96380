use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("index {index} out of range for {what} of size {len}")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("sequence length {len} exceeds maximum {max}")]
    Length { len: usize, max: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("annotation integrity error in document {doc_id} [{start}, {end}): {msg}")]
    Integrity {
        doc_id: String,
        start: usize,
        end: usize,
        msg: String,
    },

    #[error("overlapping mentions at tokens [{first_start}, {first_end}) and [{second_start}, {second_end})")]
    Overlap {
        first_start: usize,
        first_end: usize,
        second_start: usize,
        second_end: usize,
    },

    #[error("malformed {what} at byte offset {offset}: {msg}")]
    Format {
        what: &'static str,
        offset: u64,
        msg: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("gradient check rejected: {0}")]
    NonDeterministic(String),

    #[error("sentence alignment error: {0}")]
    Alignment(String),

    #[error("no entry for {0}")]
    Missing(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier used in one-line CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Index { .. } => "index",
            Error::Length { .. } => "length",
            Error::Parse { .. } => "parse",
            Error::Integrity { .. } => "integrity",
            Error::Overlap { .. } => "overlap",
            Error::Format { .. } => "format",
            Error::Config(_) => "config",
            Error::Divergence { .. } => "divergence",
            Error::NonDeterministic(_) => "nondeterministic",
            Error::Alignment(_) => "alignment",
            Error::Missing(_) => "missing",
            Error::Io { .. } => "io",
        }
    }
}
