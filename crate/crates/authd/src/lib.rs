//! Meeting admission gateway.
//!
//! Participants register a camera fingerprint and a fallback password once.
//! On every join the first frames of their stream are fingerprinted and
//! matched against the registration; a failed match degrades to a
//! single-use password challenge instead of a hard refusal.

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod audit;
pub mod config;
mod frames;
mod gateway;
pub mod http;
pub mod password;
pub mod store;

pub use audit::{AuditEvent, AuditLog, AuditRecord};
pub use config::{ConfigError, ServiceConfig, CONFIG_ENV};
pub use frames::resolve_frames_ref;
pub use gateway::{
    AuthOutcome, Clock, Decision, Gateway, JoinResult, MeetingPolicy, PasswordResult,
    CHALLENGE_TTL_SECONDS, MIN_REGISTRATION_FRAMES,
};
pub use password::PasswordDigest;
pub use store::{load_store, save_store, Quarantined, StoreError, UserRecord, UserStore};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid user id: {0}")]
    InvalidUserId(String),
    #[error("user {0:?} is already registered")]
    Duplicate(String),
    #[error("only {available} usable registration frames; at least {floor} required")]
    InsufficientFrames { available: usize, floor: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("challenge token rejected: {0}")]
    InvalidToken(&'static str),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("internal error: {0}")]
    Internal(String),
}

impl GatewayError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> GatewayError {
        GatewayError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            GatewayError::InvalidUserId(_) => "invalid_user_id",
            GatewayError::Duplicate(_) => "duplicate_user",
            GatewayError::InsufficientFrames { .. } => "insufficient_frames",
            GatewayError::InvalidInput(_) => "invalid_input",
            GatewayError::InvalidToken(_) => "invalid_token",
            GatewayError::InvalidPolicy(_) => "invalid_policy",
            GatewayError::Store(StoreError::Duplicate(_)) => "duplicate_user",
            GatewayError::Store(_) => "storage",
            GatewayError::Io { .. } => "io",
            GatewayError::Internal(_) => "internal",
        }
    }
}
