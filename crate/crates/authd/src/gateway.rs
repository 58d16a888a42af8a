//! Registration, join verification and password fallback.
//!
//! Lock order: `store` before `challenges`; neither is held while
//! fingerprinting, matching or hashing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Duration, Utc};
use prnu_core::frame_io::{select_query_frames, select_registration_frames};
use prnu_core::{
    estimate_fingerprint, match_fingerprints, DenoiserConfig, Fingerprint, FrameSequence,
    MatcherConfig, PceReport,
};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{AuditEvent, AuditLog, AuditRecord};
use crate::password::PasswordDigest;
use crate::store::{load_store, save_store, write_atomic, UserRecord, UserStore};
use crate::GatewayError;

/// Registrations yielding fewer frames than this are refused.
pub const MIN_REGISTRATION_FRAMES: usize = 10;
pub const CHALLENGE_TTL_SECONDS: i64 = 300;
const CHALLENGE_FILE: &str = "challenges.json";
const AUDIT_FILE: &str = "audit.ndjson";
const MAX_USER_ID_LEN: usize = 256;

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeetingPolicy {
    pub matcher_config: MatcherConfig,
    pub query_frame_count: usize,
    pub registration_frame_count: usize,
    pub password_attempt_limit: u32,
}

impl Default for MeetingPolicy {
    fn default() -> Self {
        MeetingPolicy {
            matcher_config: MatcherConfig::default(),
            query_frame_count: 100,
            registration_frame_count: 60,
            password_attempt_limit: 3,
        }
    }
}

impl MeetingPolicy {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.query_frame_count == 0 || self.registration_frame_count == 0 {
            return Err(GatewayError::InvalidPolicy("frame counts must be >= 1".into()));
        }
        if self.password_attempt_limit == 0 {
            return Err(GatewayError::InvalidPolicy("password_attempt_limit must be >= 1".into()));
        }
        self.matcher_config
            .validate()
            .map_err(|e| GatewayError::InvalidPolicy(e.to_string()))
    }

    /// A policy asking for fewer frames than the global floor is its own
    /// floor.
    pub fn registration_floor(&self) -> usize {
        MIN_REGISTRATION_FRAMES.min(self.registration_frame_count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AdmittedPrnu,
    AdmittedPassword,
    PasswordRequired,
    Rejected,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::AdmittedPrnu => "admitted_prnu",
            Decision::AdmittedPassword => "admitted_password",
            Decision::PasswordRequired => "password_required",
            Decision::Rejected => "rejected",
        }
    }

    pub fn is_admitted(self) -> bool {
        matches!(self, Decision::AdmittedPrnu | Decision::AdmittedPassword)
    }
}

/// `admitted_prnu` always carries an accepted report. `password_required`
/// carries a rejected report unless no match could be computed, in which
/// case `reason` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthOutcome {
    pub decision: Decision,
    pub pce_report: Option<PceReport>,
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JoinResult {
    pub outcome: AuthOutcome,
    /// Present exactly when the decision is `password_required`.
    pub challenge_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PasswordResult {
    pub outcome: AuthOutcome,
    pub attempts_remaining: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Challenge {
    user_id: String,
    session_id: String,
    expires_at: DateTime<Utc>,
    attempts_left: u32,
    pce_report: Option<PceReport>,
}

/// Challenges keyed by the SHA-256 of their token, so a persisted table
/// cannot be replayed.
type ChallengeTable = HashMap<String, Challenge>;

fn token_key(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    OsRng.fill_bytes(&mut buf);
    hex::encode(buf)
}

fn validate_user_id(user_id: &str) -> Result<(), GatewayError> {
    if user_id.is_empty() {
        return Err(GatewayError::InvalidUserId("empty".into()));
    }
    if user_id.len() > MAX_USER_ID_LEN {
        return Err(GatewayError::InvalidUserId(format!("longer than {MAX_USER_ID_LEN} bytes")));
    }
    if user_id.chars().any(char::is_control) {
        return Err(GatewayError::InvalidUserId("contains control characters".into()));
    }
    Ok(())
}

pub struct Gateway {
    policy: MeetingPolicy,
    denoiser: DenoiserConfig,
    store: RwLock<UserStore>,
    store_dir: Option<PathBuf>,
    challenges: Mutex<ChallengeTable>,
    audit: AuditLog,
    clock: Clock,
}

impl Gateway {
    pub fn in_memory(policy: MeetingPolicy, denoiser: DenoiserConfig) -> Result<Gateway, GatewayError> {
        Gateway::with_store(policy, denoiser, UserStore::new())
    }

    pub fn with_store(
        policy: MeetingPolicy,
        denoiser: DenoiserConfig,
        store: UserStore,
    ) -> Result<Gateway, GatewayError> {
        policy.validate()?;
        denoiser
            .validate()
            .map_err(|e| GatewayError::InvalidPolicy(e.to_string()))?;
        Ok(Gateway {
            policy,
            denoiser,
            store: RwLock::new(store),
            store_dir: None,
            challenges: Mutex::new(HashMap::new()),
            audit: AuditLog::in_memory(),
            clock: Arc::new(Utc::now),
        })
    }

    /// Opens a persistent gateway rooted at `store_dir`. Pending challenges
    /// survive restarts. The audit log defaults to `audit.ndjson` inside the
    /// store.
    pub fn open(
        policy: MeetingPolicy,
        denoiser: DenoiserConfig,
        store_dir: &Path,
        audit_path: Option<&Path>,
    ) -> Result<Gateway, GatewayError> {
        let store = load_store(store_dir)?;
        let mut gw = Gateway::with_store(policy, denoiser, store)?;
        let challenge_path = store_dir.join(CHALLENGE_FILE);
        match std::fs::read(&challenge_path) {
            Ok(bytes) => {
                let table: ChallengeTable = serde_json::from_slice(&bytes)
                    .map_err(|e| GatewayError::Internal(format!("corrupt challenge table: {e}")))?;
                gw.challenges = Mutex::new(table);
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(GatewayError::io(&challenge_path, e)),
        }
        let default_audit = store_dir.join(AUDIT_FILE);
        gw.audit = AuditLog::open(audit_path.unwrap_or(&default_audit))?;
        gw.store_dir = Some(store_dir.to_path_buf());
        Ok(gw)
    }

    pub fn with_clock(mut self, clock: Clock) -> Gateway {
        self.clock = clock;
        self
    }

    pub fn policy(&self) -> &MeetingPolicy {
        &self.policy
    }

    pub fn denoiser(&self) -> &DenoiserConfig {
        &self.denoiser
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn store_snapshot(&self) -> UserStore {
        self.store.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn user(&self, user_id: &str) -> Option<Arc<UserRecord>> {
        self.store
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(user_id)
            .cloned()
    }

    /// Writes the store (if persistent) and syncs the audit log.
    pub fn flush(&self) -> Result<(), GatewayError> {
        if let Some(dir) = &self.store_dir {
            let store = self.store.read().unwrap_or_else(|p| p.into_inner());
            save_store(&store, dir)?;
        }
        self.audit.flush()
    }

    fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    fn record(
        &self,
        event: AuditEvent,
        user_id: Option<&str>,
        session_id: Option<&str>,
        outcome: &str,
        pce_report: Option<PceReport>,
        reason: Option<String>,
    ) -> Result<(), GatewayError> {
        self.audit.append(&AuditRecord {
            timestamp: self.now(),
            event,
            user_id: user_id.map(str::to_string),
            session_id: session_id.map(str::to_string),
            outcome: outcome.to_string(),
            pce_report,
            reason,
        })
    }

    pub fn register_user(
        &self,
        user_id: &str,
        frames: &FrameSequence,
        password: &str,
    ) -> Result<Arc<UserRecord>, GatewayError> {
        let result = self.register_inner(user_id, frames, password);
        match &result {
            Ok(rec) => self.record(AuditEvent::Register, Some(user_id), None, "registered", None, Some(format!("frames_used={}", rec.fingerprint.frames_used())))?,
            Err(e) => self.record(AuditEvent::Register, Some(user_id), None, "refused", None, Some(e.to_string()))?,
        }
        result
    }

    fn register_inner(
        &self,
        user_id: &str,
        frames: &FrameSequence,
        password: &str,
    ) -> Result<Arc<UserRecord>, GatewayError> {
        validate_user_id(user_id)?;
        if password.is_empty() {
            return Err(GatewayError::InvalidInput("password is empty".into()));
        }
        if self.store.read().unwrap_or_else(|p| p.into_inner()).is_taken(user_id) {
            return Err(GatewayError::Duplicate(user_id.to_string()));
        }
        let selection = select_registration_frames(frames, self.policy.registration_frame_count)
            .map_err(|e| GatewayError::InvalidInput(e.to_string()))?;
        let floor = self.policy.registration_floor();
        if selection.sequence.len() < floor {
            return Err(GatewayError::InsufficientFrames {
                available: selection.sequence.len(),
                floor,
            });
        }
        let mut fingerprint = estimate_fingerprint(&selection.sequence, &self.denoiser, true)
            .map_err(|e| GatewayError::InvalidInput(e.to_string()))?
            .to_storage_precision()
            .with_label(user_id);
        let registered_at = self.now();
        fingerprint.created_at = registered_at;
        let record = UserRecord {
            user_id: user_id.to_string(),
            fingerprint,
            password_hash: PasswordDigest::create(password)?,
            registered_at,
        };

        let mut store = self.store.write().unwrap_or_else(|p| p.into_inner());
        store.insert(record).map_err(|e| match e {
            crate::StoreError::Duplicate(id) => GatewayError::Duplicate(id),
            other => other.into(),
        })?;
        if let Some(dir) = &self.store_dir {
            if let Err(e) = save_store(&store, dir) {
                store.remove(user_id);
                return Err(e.into());
            }
        }
        Ok(store.get(user_id).cloned().expect("just inserted"))
    }

    /// Fingerprints the first `query_frame_count` frames and matches them
    /// against the user's registration.
    pub fn request_join(&self, user_id: &str, query: &FrameSequence) -> Result<JoinResult, GatewayError> {
        self.join_with(user_id, |registered| {
            if (query.width(), query.height()) != (registered.width(), registered.height()) {
                return Err(format!(
                    "query is {}x{}, registration is {}x{}",
                    query.width(),
                    query.height(),
                    registered.width(),
                    registered.height()
                ));
            }
            let selection = select_query_frames(query, self.policy.query_frame_count).map_err(|e| e.to_string())?;
            estimate_fingerprint(&selection.sequence, &self.denoiser, true).map_err(|e| e.to_string())
        })
    }

    /// Same as [`Gateway::request_join`] for a fingerprint computed by the
    /// participant. It is matched exactly like one computed here.
    pub fn request_join_fingerprint(&self, user_id: &str, query: &Fingerprint) -> Result<JoinResult, GatewayError> {
        self.join_with(user_id, |_| Ok(query.clone()))
    }

    fn join_with(
        &self,
        user_id: &str,
        query_fingerprint: impl FnOnce(&Fingerprint) -> Result<Fingerprint, String>,
    ) -> Result<JoinResult, GatewayError> {
        let session_id = random_hex(8);
        let (record, quarantine_reason) = {
            let store = self.store.read().unwrap_or_else(|p| p.into_inner());
            (store.get(user_id).cloned(), store.quarantined(user_id).map(|q| q.reason.clone()))
        };
        let Some(record) = record else {
            let reason = match quarantine_reason {
                Some(r) => format!("registration quarantined: {r}"),
                None => "unknown user".to_string(),
            };
            return self.finish_join(user_id, &session_id, Decision::Rejected, None, Some(reason));
        };

        let matched = query_fingerprint(&record.fingerprint).and_then(|q| {
            match_fingerprints(&record.fingerprint, &q, &self.policy.matcher_config).map_err(|e| e.to_string())
        });
        match matched {
            Ok(report) if report.accepted => {
                self.finish_join(user_id, &session_id, Decision::AdmittedPrnu, Some(report), None)
            }
            Ok(report) => self.finish_join(user_id, &session_id, Decision::PasswordRequired, Some(report), None),
            Err(reason) => self.finish_join(
                user_id,
                &session_id,
                Decision::PasswordRequired,
                None,
                Some(format!("no usable match: {reason}")),
            ),
        }
    }

    fn finish_join(
        &self,
        user_id: &str,
        session_id: &str,
        decision: Decision,
        pce_report: Option<PceReport>,
        reason: Option<String>,
    ) -> Result<JoinResult, GatewayError> {
        let timestamp = self.now();
        let challenge_token = if decision == Decision::PasswordRequired {
            let token = random_hex(16);
            let mut table = self.challenges.lock().unwrap_or_else(|p| p.into_inner());
            table.retain(|_, c| c.expires_at > timestamp);
            table.insert(
                token_key(&token),
                Challenge {
                    user_id: user_id.to_string(),
                    session_id: session_id.to_string(),
                    expires_at: timestamp + Duration::seconds(CHALLENGE_TTL_SECONDS),
                    attempts_left: self.policy.password_attempt_limit,
                    pce_report,
                },
            );
            self.persist_challenges(&table)?;
            Some(token)
        } else {
            None
        };
        self.record(AuditEvent::Join, Some(user_id), Some(session_id), decision.as_str(), pce_report, reason.clone())?;
        Ok(JoinResult {
            outcome: AuthOutcome {
                decision,
                pce_report,
                user_id: user_id.to_string(),
                timestamp,
                session_id: Some(session_id.to_string()),
                reason,
            },
            challenge_token,
        })
    }

    fn persist_challenges(&self, table: &ChallengeTable) -> Result<(), GatewayError> {
        if let Some(dir) = &self.store_dir {
            std::fs::create_dir_all(dir).map_err(|e| GatewayError::io(dir, e))?;
            let json = serde_json::to_vec(table).expect("challenges serialize");
            write_atomic(&dir.join(CHALLENGE_FILE), &json)?;
        }
        Ok(())
    }

    /// Answers a challenge. Each call spends one attempt before the
    /// (slow) verification runs, so concurrent guesses cannot exceed the
    /// limit.
    pub fn submit_password(&self, challenge_token: &str, password: &str) -> Result<PasswordResult, GatewayError> {
        let key = token_key(challenge_token);
        let now = self.now();
        let reserved = {
            let mut table = self.challenges.lock().unwrap_or_else(|p| p.into_inner());
            let verdict = match table.get_mut(&key) {
                None => Err("unknown or already used"),
                Some(c) if c.expires_at <= now => Err("expired"),
                Some(c) if c.attempts_left == 0 => Err("no attempts remaining"),
                Some(c) => {
                    c.attempts_left -= 1;
                    Ok(c.clone())
                }
            };
            if verdict == Err("expired") {
                table.remove(&key);
            }
            self.persist_challenges(&table)?;
            verdict
        };
        let challenge = match reserved {
            Ok(c) => c,
            Err(why) => {
                self.record(AuditEvent::Password, None, None, "invalid_token", None, Some(why.to_string()))?;
                return Err(GatewayError::InvalidToken(why));
            }
        };

        let verified = self
            .user(&challenge.user_id)
            .map(|rec| rec.password_hash.verify(password))
            .unwrap_or(false);

        let (decision, attempts_remaining) = {
            let mut table = self.challenges.lock().unwrap_or_else(|p| p.into_inner());
            let Some(current) = table.get(&key) else {
                drop(table);
                self.record(
                    AuditEvent::Password,
                    Some(&challenge.user_id),
                    Some(&challenge.session_id),
                    "invalid_token",
                    None,
                    Some("consumed concurrently".into()),
                )?;
                return Err(GatewayError::InvalidToken("unknown or already used"));
            };
            let left = current.attempts_left;
            let decision = if verified {
                Decision::AdmittedPassword
            } else if left == 0 {
                Decision::Rejected
            } else {
                Decision::PasswordRequired
            };
            if decision != Decision::PasswordRequired {
                table.remove(&key);
            }
            self.persist_challenges(&table)?;
            (decision, if decision == Decision::PasswordRequired { left } else { 0 })
        };

        let reason = match decision {
            Decision::Rejected => Some("password attempts exhausted".to_string()),
            Decision::PasswordRequired => Some(format!("wrong password, {attempts_remaining} attempts remaining")),
            _ => None,
        };
        let pce_report = (decision == Decision::PasswordRequired).then_some(challenge.pce_report).flatten();
        self.record(
            AuditEvent::Password,
            Some(&challenge.user_id),
            Some(&challenge.session_id),
            decision.as_str(),
            pce_report,
            reason.clone(),
        )?;
        Ok(PasswordResult {
            outcome: AuthOutcome {
                decision,
                pce_report,
                user_id: challenge.user_id,
                timestamp: self.now(),
                session_id: Some(challenge.session_id),
                reason,
            },
            attempts_remaining,
        })
    }
}
