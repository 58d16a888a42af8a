//! Service configuration file.

use std::path::{Path, PathBuf};

use prnu_core::DenoiserConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::MeetingPolicy;

/// Names the config file when no explicit path is given.
pub const CONFIG_ENV: &str = "PRNU_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("bad config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub policy: MeetingPolicy,
    pub denoiser: DenoiserConfig,
    pub store_path: PathBuf,
    /// Defaults to `audit.ndjson` inside the store.
    pub audit_path: Option<PathBuf>,
    pub listen: String,
    pub max_body_bytes: usize,
    /// Lets clients name server-side files in `frames_ref`.
    pub allow_frame_paths: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            policy: MeetingPolicy::default(),
            denoiser: DenoiserConfig::default(),
            store_path: PathBuf::from("prnu-store"),
            audit_path: None,
            listen: "127.0.0.1:8080".into(),
            max_body_bytes: 512 << 20,
            allow_frame_paths: true,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ServiceConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.denoiser
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.max_body_bytes == 0 {
            return Err(ConfigError::Invalid("max_body_bytes must be positive".into()));
        }
        if self.store_path.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("store_path is empty".into()));
        }
        Ok(())
    }
}
