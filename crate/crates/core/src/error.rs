use std::path::PathBuf;

use crate::transport::TransportError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Log(#[from] crate::metrics::LogError),
    #[error("simulation aborted: packet for unknown flow {0}")]
    UnknownFlow(crate::packet::FlowId),
    #[error("simulation aborted: {0}")]
    Transport(#[from] TransportError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's input rather than the run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::UnknownPreset(_))
    }
}
