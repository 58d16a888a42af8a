//! Append-only NDJSON audit trail.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use prnu_core::PceReport;
use serde::{Deserialize, Serialize};

use crate::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditEvent {
    Register,
    Join,
    Password,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub timestamp: DateTime<Utc>,
    pub event: AuditEvent,
    pub user_id: Option<String>,
    pub session_id: Option<String>,
    /// A decision name for joins and passwords; `registered`, `refused` or
    /// `invalid_token` otherwise.
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pce_report: Option<PceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

enum Sink {
    File { file: File, path: PathBuf },
    Memory(Vec<String>),
}

/// Appends are serialized by an internal lock; lines are never rewritten.
pub struct AuditLog {
    sink: Mutex<Sink>,
}

impl AuditLog {
    pub fn in_memory() -> AuditLog {
        AuditLog {
            sink: Mutex::new(Sink::Memory(Vec::new())),
        }
    }

    pub fn open(path: &Path) -> Result<AuditLog, GatewayError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| GatewayError::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::io(path, e))?;
        Ok(AuditLog {
            sink: Mutex::new(Sink::File {
                file,
                path: path.to_path_buf(),
            }),
        })
    }

    pub fn append(&self, record: &AuditRecord) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(record).expect("audit record serializes");
        line.push('\n');
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        match &mut *sink {
            Sink::File { file, path } => file
                .write_all(line.as_bytes())
                .map_err(|e| GatewayError::io(path, e)),
            Sink::Memory(lines) => {
                lines.push(line);
                Ok(())
            }
        }
    }

    /// The whole log as NDJSON text.
    pub fn snapshot(&self) -> Result<String, GatewayError> {
        let sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        match &*sink {
            Sink::File { path, .. } => {
                std::fs::read_to_string(path).map_err(|e| GatewayError::io(path, e))
            }
            Sink::Memory(lines) => Ok(lines.concat()),
        }
    }

    pub fn records(&self) -> Result<Vec<AuditRecord>, GatewayError> {
        self.snapshot()?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| GatewayError::Internal(format!("audit line: {e}"))))
            .collect()
    }

    pub fn flush(&self) -> Result<(), GatewayError> {
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        if let Sink::File { file, path } = &mut *sink {
            file.sync_all().map_err(|e| GatewayError::io(path, e))?;
        }
        Ok(())
    }
}
