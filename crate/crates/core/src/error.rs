use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The target violates an assumption of the signal model (e.g. its echo
    /// delay exceeds the cyclic prefix).
    #[error("target outside signal model: {0}")]
    OutOfModel(String),

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("peak detection failed: {0}")]
    DetectionFailure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("scenario infeasible: {0}")]
    ScenarioInfeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
