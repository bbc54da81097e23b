use std::path::{Path, PathBuf};

use cns_core::CnsError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CnsError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e.root() {
                CnsError::InvalidArgument(_) | CnsError::ShapeMismatch { .. } | CnsError::InvariantViolation(_) => 2,
                CnsError::Diverged { .. } | CnsError::Degenerate(_) => 3,
                _ => 4,
            },
        }
    }
}
