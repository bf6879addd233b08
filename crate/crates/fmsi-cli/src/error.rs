use std::path::PathBuf;

/// Failures surfaced by the binary, split by exit code: usage errors exit 1,
/// data errors exit 2, numeric failures exit 3. Everything prints to stderr;
/// stdout stays reserved for results.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    /// Attach the offending path to a bare I/O error.
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        move |source| CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<fmsi::Error> for CliError {
    fn from(err: fmsi::Error) -> Self {
        match err.class() {
            fmsi::ErrorClass::Numeric => CliError::Numeric(err.to_string()),
            fmsi::ErrorClass::Data => CliError::Data(err.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
