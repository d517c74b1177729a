use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("cannot read config {path}: {source}")]
    ConfigFile { path: String, source: io::Error },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("simulation fault: {0}")]
    Fault(String),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    /// Configuration problems are the caller's fault; everything else is a
    /// runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::ConfigFile { .. })
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
