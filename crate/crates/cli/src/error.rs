use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] deinterleave::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    /// 1 for usage errors, 2 for unreadable or malformed files, 3 when an
    /// internal invariant broke.
    pub fn exit_code(&self) -> i32 {
        use deinterleave::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::ExhaustiveCap { .. } => 1,
                E::Parse { .. } | E::Io(_) | E::Json(_) | E::Csv(_) | E::Simultaneous { .. } => 2,
                E::InvalidMove(_) => 3,
            },
        }
    }
}
