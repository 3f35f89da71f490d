use otfs_core::OtfsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration file does not match the schema.
    #[error("config schema: {0}")]
    Schema(String),

    /// Well-formed but infeasible frame/channel combination.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] OtfsError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
