use std::path::PathBuf;

/// Errors from file handling, configuration and the training driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("corrupt file {path}: {msg}")]
    Corruption { path: PathBuf, msg: String },
    #[error("missing input {0}")]
    MissingInput(PathBuf),
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] adn_core::Error),
    #[error("training failed at step {step}: {msg}")]
    Numeric { step: u64, msg: String },
    #[error("{0}")]
    Other(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path)
        } else {
            Error::Io { path, source }
        }
    }

    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownKey(_) => 2,
            Error::MissingInput(_) => 3,
            Error::Numeric { .. } | Error::Core(adn_core::Error::Numeric(_)) => 4,
            _ => 1,
        }
    }
}
