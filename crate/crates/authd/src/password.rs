//! Salted Argon2id password hashes stored as PHC strings.

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::{Algorithm, Argon2, Params, Version};
use rand::rngs::OsRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::GatewayError;

pub const SALT_BYTES: usize = 16;
const MEMORY_KIB: u32 = 32 * 1024;
const ITERATIONS: u32 = 3;

fn hasher() -> Argon2<'static> {
    let params = Params::new(MEMORY_KIB, ITERATIONS, 1, None).expect("static argon2 parameters");
    Argon2::new(Algorithm::Argon2id, Version::V0x13, params)
}

/// A PHC-encoded password hash. Never holds the plaintext.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PasswordDigest(String);

impl std::fmt::Debug for PasswordDigest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PasswordDigest(..)")
    }
}

impl PasswordDigest {
    pub fn create(password: &str) -> Result<PasswordDigest, GatewayError> {
        let mut salt = [0u8; SALT_BYTES];
        OsRng.fill_bytes(&mut salt);
        let salt = SaltString::encode_b64(&salt).map_err(|e| GatewayError::Internal(e.to_string()))?;
        let phc = hasher()
            .hash_password(password.as_bytes(), &salt)
            .map_err(|e| GatewayError::Internal(e.to_string()))?;
        Ok(PasswordDigest(phc.to_string()))
    }

    /// Parameters are taken from the stored string, so older hashes keep
    /// verifying if the defaults change. The digest comparison is constant
    /// time.
    pub fn verify(&self, password: &str) -> bool {
        match PasswordHash::new(&self.0) {
            Ok(parsed) => Argon2::default()
                .verify_password(password.as_bytes(), &parsed)
                .is_ok(),
            Err(_) => false,
        }
    }

    pub fn as_phc(&self) -> &str {
        &self.0
    }

    pub fn from_phc(phc: String) -> Result<PasswordDigest, GatewayError> {
        PasswordHash::new(&phc).map_err(|e| GatewayError::Internal(format!("bad password hash: {e}")))?;
        Ok(PasswordDigest(phc))
    }
}
