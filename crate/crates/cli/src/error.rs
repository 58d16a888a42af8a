use std::fmt;

use prnu_authd::GatewayError;
use prnu_core::{FingerprintError, FrameError, MatchError, SimError};
use serde_json::json;

/// A failure reported as JSON on stderr with a nonzero exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
}

pub const EXIT_ERROR: u8 = 2;
pub const EXIT_DIMENSION_MISMATCH: u8 = 3;

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            kind,
            message: message.into(),
            exit_code: EXIT_ERROR,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({ "error": self.kind, "message": self.message })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        let kind = match e {
            FrameError::Io(_) => "io",
            _ => "bad_input",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<FingerprintError> for CliError {
    fn from(e: FingerprintError) -> Self {
        let kind = match e {
            FingerprintError::Io(_) => "io",
            FingerprintError::BadMagic
            | FingerprintError::Truncated { .. }
            | FingerprintError::ChecksumMismatch { .. } => "bad_fingerprint_file",
            _ => "fingerprint",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        match e {
            MatchError::DimensionMismatch { .. } => CliError {
                kind: "dimension_mismatch",
                message: e.to_string(),
                exit_code: EXIT_DIMENSION_MISMATCH,
            },
            _ => CliError::new("match", e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let kind = match e {
            SimError::Output { .. } => "output",
            _ => "simulation",
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        CliError::new(e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}
