use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid instance at {location}: {message}")]
    Validation { location: String, message: String },

    #[error("algorithm contract violation: {0}")]
    Contract(String),

    #[error("clairvoyant probe: delay requested at t={requested} but the current time is {now}")]
    Clairvoyance { requested: f64, now: f64 },

    #[error("size guard exceeded: {0}")]
    Guard(String),

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("instance digest mismatch: {0} != {1}")]
    DigestMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line harness.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Guard(_) => 2,
            Error::Parse { .. } | Error::Validation { .. } | Error::MissingData(_) | Error::Io(_) => 3,
            Error::Domain(_) => 3,
            Error::Contract(_) | Error::Clairvoyance { .. } | Error::DigestMismatch(..) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
