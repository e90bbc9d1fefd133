use serde::Serialize;
use xtalk_core::Error;

use crate::units::UnitError;

/// A command failure with its stable code and process exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub code: &'static str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_PARAMETER: i32 = 4;
pub const EXIT_RESOURCE: i32 = 5;

impl Failure {
    pub fn new(code: &'static str, exit_code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            exit_code,
            message: message.into(),
            suggestion: None,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new("E_INPUT", EXIT_INPUT, message)
    }

    pub fn param(message: impl Into<String>) -> Self {
        Self::new("E_PARAM", EXIT_PARAMETER, message)
    }

    /// The single-line JSON document written to standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Envelope<'a> {
            schema_version: u32,
            error: &'a Failure,
        }
        serde_json::to_string(&Envelope {
            schema_version: 1,
            error: self,
        })
        .expect("failure serializes")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Domain(_) | Error::Parse { .. } | Error::Validation { .. } | Error::Input(_) | Error::Io { .. } => {
                Self::input(message)
            }
            Error::NoTriggers => Self::new("E_NO_TRIGGER", EXIT_DATA, message),
            Error::Data(_) => Self::new("E_DATA", EXIT_DATA, message),
            Error::Parameter { suggestion, .. } => Self {
                suggestion,
                ..Self::param(message)
            },
            Error::Config(_) => Self::new("E_CONFIG", EXIT_PARAMETER, message),
            Error::Resource(_) => Self::new("E_RESOURCE", EXIT_RESOURCE, message),
        }
    }
}

impl From<UnitError> for Failure {
    fn from(e: UnitError) -> Self {
        Self::param(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;
