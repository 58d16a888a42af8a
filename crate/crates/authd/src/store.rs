//! Persistent user store: `index.json` plus one `PRNUFP1` file per user.
//!
//! Every file is written to a temporary sibling and renamed into place, and
//! the index is renamed last, so a crash leaves either the old or the new
//! store visible.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use prnu_core::fingerprint::{decode_prnufp, encode_prnufp};
use prnu_core::Fingerprint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::password::PasswordDigest;

pub const INDEX_FILE: &str = "index.json";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("user {0:?} is already registered")]
    Duplicate(String),
    #[error("corrupt store index: {0}")]
    CorruptIndex(String),
    #[error("store i/o at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Fingerprint(#[from] prnu_core::FingerprintError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    pub fingerprint: Fingerprint,
    pub password_hash: PasswordDigest,
    pub registered_at: DateTime<Utc>,
}

/// One line of `index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub user_id: String,
    pub password_hash: String,
    pub registered_at: DateTime<Utc>,
    pub fingerprint_file: String,
    pub fingerprint_label: String,
    pub fingerprint_created_at: DateTime<Utc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Index {
    version: u32,
    users: Vec<IndexEntry>,
}

/// A record whose fingerprint file could not be trusted. Its index entry is
/// kept so that a later save does not lose it.
#[derive(Debug, Clone, PartialEq)]
pub struct Quarantined {
    pub entry: IndexEntry,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserStore {
    records: BTreeMap<String, Arc<UserRecord>>,
    quarantined: BTreeMap<String, Quarantined>,
}

impl UserStore {
    pub fn new() -> UserStore {
        UserStore::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, user_id: &str) -> Option<&Arc<UserRecord>> {
        self.records.get(user_id)
    }

    /// True for loaded and quarantined ids alike.
    pub fn is_taken(&self, user_id: &str) -> bool {
        self.records.contains_key(user_id) || self.quarantined.contains_key(user_id)
    }

    pub fn quarantined(&self, user_id: &str) -> Option<&Quarantined> {
        self.quarantined.get(user_id)
    }

    pub fn quarantined_records(&self) -> impl Iterator<Item = &Quarantined> {
        self.quarantined.values()
    }

    pub fn records(&self) -> impl Iterator<Item = &Arc<UserRecord>> {
        self.records.values()
    }

    pub fn insert(&mut self, record: UserRecord) -> Result<(), StoreError> {
        if self.is_taken(&record.user_id) {
            return Err(StoreError::Duplicate(record.user_id));
        }
        self.records.insert(record.user_id.clone(), Arc::new(record));
        Ok(())
    }

    pub fn remove(&mut self, user_id: &str) -> Option<Arc<UserRecord>> {
        self.records.remove(user_id)
    }
}

/// File name for a user's fingerprint; user ids are arbitrary strings, so
/// the name is derived from a digest of the id.
pub fn fingerprint_file_name(user_id: &str) -> String {
    let digest = Sha256::digest(user_id.as_bytes());
    format!("fp-{}.prnufp", hex::encode(&digest[..16]))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    file.write_all(bytes).map_err(io_err(&tmp))?;
    file.sync_all().map_err(io_err(&tmp))?;
    drop(file);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn save_store(store: &UserStore, dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut users = Vec::with_capacity(store.records.len() + store.quarantined.len());
    for record in store.records.values() {
        let name = fingerprint_file_name(&record.user_id);
        let path = dir.join(&name);
        let bytes = encode_prnufp(&record.fingerprint)?;
        if fs::read(&path).ok().as_deref() != Some(bytes.as_slice()) {
            write_atomic(&path, &bytes)?;
        }
        users.push(IndexEntry {
            user_id: record.user_id.clone(),
            password_hash: record.password_hash.as_phc().to_string(),
            registered_at: record.registered_at,
            fingerprint_file: name,
            fingerprint_label: record.fingerprint.source_label.clone(),
            fingerprint_created_at: record.fingerprint.created_at,
        });
    }
    users.extend(store.quarantined.values().map(|q| q.entry.clone()));
    users.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    let index = Index {
        version: INDEX_VERSION,
        users,
    };
    let json = serde_json::to_vec_pretty(&index).expect("index serializes");
    write_atomic(&dir.join(INDEX_FILE), &json)?;

    // Files for users no longer in the index.
    let keep: std::collections::HashSet<&str> =
        index.users.iter().map(|u| u.fingerprint_file.as_str()).collect();
    if let Ok(entries) = fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.starts_with("fp-") && name.ends_with(".prnufp") && !keep.contains(name) {
                let _ = fs::remove_file(entry.path());
            }
        }
    }
    Ok(())
}

/// Loads a store. A directory without an index is an empty store.
pub fn load_store(dir: &Path) -> Result<UserStore, StoreError> {
    let index_path = dir.join(INDEX_FILE);
    let bytes = match fs::read(&index_path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(UserStore::new()),
        Err(e) => return Err(io_err(&index_path)(e)),
    };
    let index: Index =
        serde_json::from_slice(&bytes).map_err(|e| StoreError::CorruptIndex(e.to_string()))?;
    if index.version != INDEX_VERSION {
        return Err(StoreError::CorruptIndex(format!(
            "unsupported version {}",
            index.version
        )));
    }
    let mut store = UserStore::new();
    for entry in index.users {
        if entry.user_id.is_empty() {
            return Err(StoreError::CorruptIndex("empty user_id".into()));
        }
        if store.is_taken(&entry.user_id) {
            return Err(StoreError::CorruptIndex(format!(
                "user {:?} listed twice",
                entry.user_id
            )));
        }
        if entry.fingerprint_file.contains(['/', '\\']) || entry.fingerprint_file.starts_with('.') {
            return Err(StoreError::CorruptIndex(format!(
                "fingerprint file {:?} escapes the store",
                entry.fingerprint_file
            )));
        }
        match load_record(dir, &entry) {
            Ok(record) => {
                store.records.insert(entry.user_id.clone(), Arc::new(record));
            }
            Err(reason) => {
                tracing::warn!(user_id = %entry.user_id, %reason, "quarantining user record");
                store
                    .quarantined
                    .insert(entry.user_id.clone(), Quarantined { entry, reason });
            }
        }
    }
    Ok(store)
}

fn load_record(dir: &Path, entry: &IndexEntry) -> Result<UserRecord, String> {
    let path = dir.join(&entry.fingerprint_file);
    let bytes = fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let fingerprint = decode_prnufp(&bytes, entry.fingerprint_label.clone(), entry.fingerprint_created_at)
        .map_err(|e| e.to_string())?;
    let password_hash =
        PasswordDigest::from_phc(entry.password_hash.clone()).map_err(|e| e.to_string())?;
    Ok(UserRecord {
        user_id: entry.user_id.clone(),
        fingerprint,
        password_hash,
        registered_at: entry.registered_at,
    })
}
