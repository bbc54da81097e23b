use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CnsError>;

#[derive(Debug, Error)]
pub enum CnsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("integration diverged at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    #[error("chain {chain}: {source}")]
    InChain {
        chain: usize,
        #[source]
        source: Box<CnsError>,
    },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CnsError {
    /// The innermost error, unwrapping chain context.
    pub fn root(&self) -> &CnsError {
        match self {
            CnsError::InChain { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CnsError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CnsError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CnsError::CorruptFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
