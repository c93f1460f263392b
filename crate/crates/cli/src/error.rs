use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or range problem in the configuration, prefixed by its key path.
    #[error("invalid config: {0}")]
    Config(String),
    #[error("lookup failed: {0}")]
    Lookup(String),
    #[error("malformed report: {0}")]
    Report(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] rieszlab::Error),
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

pub type CliResult<T> = std::result::Result<T, CliError>;
