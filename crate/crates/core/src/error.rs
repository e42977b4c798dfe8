use thiserror::Error;

use crate::data::DataError;
use crate::federated::FederatedError;
use crate::langmodel::ModelError;
use crate::population::PopulationError;
use crate::privacy::PrivacyError;

/// Top-level error for the simulator and its CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Federated(#[from] FederatedError),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable category, used in the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Population(_) => "population",
            Error::Privacy(_) => "privacy",
            Error::Model(_) => "model",
            Error::Data(_) => "data",
            Error::Federated(_) => "federated",
            Error::Config { .. } => "config",
            Error::Io { .. } => "io",
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
