use std::fmt;

use dgof::GofError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// A library error, optionally tied to the file it came from.
    Gof {
        file: Option<String>,
        error: GofError,
    },
    Io {
        file: String,
        error: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Gof {
                error: GofError::Numerical(_),
                ..
            } => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Gof {
                file: Some(file),
                error,
            } => write!(f, "{file}: {error}"),
            CliError::Gof { file: None, error } => write!(f, "{error}"),
            CliError::Io { file, error } => write!(f, "{file}: {error}"),
        }
    }
}

impl From<GofError> for CliError {
    fn from(error: GofError) -> Self {
        CliError::Gof { file: None, error }
    }
}

/// Attaches a file name to library errors.
pub trait InFile<T> {
    fn in_file(self, file: &str) -> Result<T, CliError>;
}

impl<T> InFile<T> for Result<T, GofError> {
    fn in_file(self, file: &str) -> Result<T, CliError> {
        self.map_err(|error| CliError::Gof {
            file: Some(file.to_string()),
            error,
        })
    }
}
