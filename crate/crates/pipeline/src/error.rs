use std::fmt::Display;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] kdloc_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Failed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

impl Error {
    pub fn invalid(message: impl Display) -> Self {
        Error::Invalid(message.to_string())
    }

    pub fn format(path: &Path, message: impl Display) -> Self {
        Error::Format { path: path.to_path_buf(), message: message.to_string() }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(kdloc_core::Error::Validation(_)) => EXIT_VALIDATION,
            Error::Core(kdloc_core::Error::Numeric(_)) => EXIT_NUMERIC,
            Error::Core(kdloc_core::Error::State(_)) => EXIT_FAILURE,
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => EXIT_VALIDATION,
            Error::Io { .. } | Error::Failed(_) => EXIT_FAILURE,
            Error::Format { .. } | Error::Json { .. } | Error::Invalid(_) => EXIT_VALIDATION,
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Writes `bytes`, creating parent directories as needed.
pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    std::fs::write(path, bytes).map_err(io_err)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Pretty-printed JSON with a trailing newline.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    write(path, &bytes)
}
