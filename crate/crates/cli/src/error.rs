use std::fmt::Display;

use serde::Serialize;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Failure reported as JSON on stderr.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub error: String,
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn validation(kind: &str, message: impl Display) -> Self {
        Self {
            error: kind.to_string(),
            message: message.to_string(),
            exit_code: EXIT_VALIDATION,
        }
    }

    pub fn io(e: impl Display) -> Self {
        Self::validation("Io", e)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.error))
    }
}

impl From<ellipsoidal::Error> for CliError {
    fn from(e: ellipsoidal::Error) -> Self {
        Self {
            error: e.kind().to_string(),
            message: e.to_string(),
            exit_code: if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL },
        }
    }
}
