use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the crosstalk toolkit.
///
/// Variants are grouped the way callers react to them: bad input documents,
/// values outside a function's domain, data that cannot be analyzed, and
/// resource limits.
#[derive(Debug, Error)]
pub enum Error {
    /// A value is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A structured document does not match its schema.
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    /// A parsed document violates a model invariant.
    #[error("validation error in `{element}`: {message}")]
    Validation { element: String, message: String },

    /// The stream has no trigger tags to fold against.
    #[error("no trigger tags in stream")]
    NoTriggers,

    /// Input is missing or unusable (for example, no triggers in a stream).
    #[error("input error: {0}")]
    Input(String),

    /// Data is present but inconsistent (for example, a measured table miss).
    #[error("data error: {0}")]
    Data(String),

    /// A parameter is invalid for the data it is applied to.
    #[error("parameter error: {message}")]
    Parameter {
        message: String,
        suggestion: Option<String>,
    },

    /// A switch configuration reuses a port or names one that does not exist.
    #[error("config error: {0}")]
    Config(String),

    /// A configured resource cap would be exceeded.
    #[error("resource error: {0}")]
    Resource(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(element: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            element: element.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
