use std::fmt;

use mrnet::Error;

/// A command failure, classified by the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit 1.
    Config(String),
    /// Missing, unreadable or malformed data and checkpoints: exit 2.
    Data(String),
    /// Training or evaluation produced non-finite values: exit 3.
    Divergence(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Format { .. } => CliError::Data(e.to_string()),
            Error::Numeric(_) => CliError::Divergence(e.to_string()),
            Error::Layer { ref message, .. } if message.contains("non-finite") || message.contains("diverged") => {
                CliError::Divergence(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Divergence(m) => write!(f, "divergence: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
