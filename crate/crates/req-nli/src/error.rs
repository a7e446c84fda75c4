//! Error taxonomy shared by every module, mapped to process exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value that can never be valid (empty hypothesis,
    /// zero-sized sample count, unknown method name).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file or combination of settings is unusable.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data is malformed: bad CSV schema, empty fields, bad labels.
    #[error("data error: {0}")]
    Data(String),

    /// Input data references something that does not exist (dangling ids,
    /// categories without verbalizations).
    #[error("reference error: {0}")]
    Reference(String),

    /// An operation was called in the wrong order (predicting before
    /// training, scoring before mining weights).
    #[error("invalid state: {0}")]
    State(String),

    /// Training produced a non-finite quantity; the run is unusable.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A remote service failed after retries or is misconfigured.
    #[error("external service error: {0}")]
    External(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 validation, 3 data, 4 external, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::State(_) => 2,
            Error::Data(_) | Error::Reference(_) | Error::Csv(_) => 3,
            Error::External(_) => 4,
            _ => 1,
        }
    }
}
