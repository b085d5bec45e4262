use std::path::PathBuf;

/// Errors raised anywhere in the simulation, processing and training pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("pipeline order violated: {0}")]
    Pipeline(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("data/format error: {0}")]
    Format(String),

    #[error("validation set checksum mismatch for {path}: expected {expected}, found {found}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("missing experiment runs: {}", .0.join(", "))]
    MissingRuns(Vec<String>),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 1 = usage/configuration, 2 = data or file format, 3 = numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::NonFinite(_) => 3,
            Error::Shape(_)
            | Error::Geometry(_)
            | Error::Pipeline(_)
            | Error::Format(_)
            | Error::Checksum { .. }
            | Error::MissingRuns(_)
            | Error::Io { .. } => 2,
        }
    }
}
