use std::fmt;
use std::path::Path;

use dcplus_core::Error;

/// A failure with its process exit code: 2 input, 3 AC, 4 empty result,
/// 5 invalid topology action, 1 anything else.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        CliError { code, kind, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::new(2, "input", message)
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError::new(1, "io", format!("{}: {e}", path.display()))
    }

    /// One-line machine-readable diagnostic for stderr.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({ "error": self.kind, "exit_code": self.code, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Syntax { .. }
            | Error::UnknownBusType { .. }
            | Error::DuplicateBus(_)
            | Error::UnknownBus { .. }
            | Error::InvalidCase(_)
            | Error::SlackCount(_)
            | Error::Dimension { .. } => (2, "input"),
            Error::NotConverged { .. } | Error::NotConvergedReference => (3, "ac_failure"),
            Error::EmptyResult(_) => (4, "empty_result"),
            Error::Islanded(_) | Error::Singular(_) | Error::Degenerate(_) | Error::InvalidTopology(_) => {
                (5, "invalid_topology")
            }
            Error::NoStateCoordinate { .. } | Error::NotCompactable => (1, "internal"),
        };
        CliError::new(code, kind, e.to_string())
    }
}
