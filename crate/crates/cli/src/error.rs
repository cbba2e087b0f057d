use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Risk(#[from] entropic_orl::DpError),
    #[error(transparent)]
    Learner(#[from] entropic_orl::RspviError),
    #[error(transparent)]
    Mdp(#[from] entropic_orl::MdpError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn dataset(path: impl Into<PathBuf>, e: entropic_orl::DatasetError) -> Self {
        let path = path.into();
        match e {
            entropic_orl::DatasetError::Io(source) => Self::Io { path, source },
            other => Self::Validation(format!("{}: {other}", path.display())),
        }
    }

    pub fn csv(path: impl Into<PathBuf>, e: csv::Error) -> Self {
        let path = path.into();
        if e.is_io_error() {
            if let csv::ErrorKind::Io(source) = e.into_kind() {
                return Self::Io { path, source };
            }
            unreachable!("is_io_error implies an Io kind");
        }
        Self::Validation(format!("{}: {e}", path.display()))
    }

    /// Process exit status: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 2,
            _ => 1,
        }
    }
}
