//! `PRNUFP1` on-disk fingerprint format.
//!
//! ```text
//! "PRNUFP1\0"            8 bytes
//! width, height          u32 LE each
//! frames_used            u32 LE
//! postprocessed          u8, then 3 zero bytes
//! values                 width*height f32 LE, row-major
//! crc                    u64 LE, CRC-64/XZ of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use crc::{Crc, CRC_64_XZ};

use super::{Fingerprint, FingerprintError};

pub const PRNUFP_MAGIC: &[u8; 8] = b"PRNUFP1\0";
const HEADER_LEN: usize = 24;
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub fn encode_prnufp(fp: &Fingerprint) -> Result<Vec<u8>, FingerprintError> {
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| FingerprintError::Invalid(format!("{what} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * fp.values.len() + 8);
    out.extend_from_slice(PRNUFP_MAGIC);
    out.extend_from_slice(&dim(fp.width, "width")?.to_le_bytes());
    out.extend_from_slice(&dim(fp.height, "height")?.to_le_bytes());
    out.extend_from_slice(&dim(fp.frames_used, "frames_used")?.to_le_bytes());
    out.extend_from_slice(&[u8::from(fp.postprocessed), 0, 0, 0]);
    for &v in &fp.values {
        let single = v as f32;
        if !single.is_finite() {
            return Err(FingerprintError::Invalid(format!("{v} does not fit in f32")));
        }
        out.extend_from_slice(&single.to_le_bytes());
    }
    let crc = CRC64.checksum(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes a `PRNUFP1` blob. Label and timestamp are not part of the format
/// and are supplied by the caller.
pub fn decode_prnufp(
    bytes: &[u8],
    source_label: impl Into<String>,
    created_at: DateTime<Utc>,
) -> Result<Fingerprint, FingerprintError> {
    if bytes.len() < PRNUFP_MAGIC.len() || &bytes[..8] != PRNUFP_MAGIC {
        return Err(FingerprintError::BadMagic);
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(FingerprintError::Truncated {
            need: HEADER_LEN + 8,
            have: bytes.len(),
        });
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let (width, height, frames_used) = (u32_at(8), u32_at(12), u32_at(16));
    let count = width
        .checked_mul(height)
        .ok_or_else(|| FingerprintError::Invalid("dimensions overflow".into()))?;
    let need = HEADER_LEN + 4 * count + 8;
    if bytes.len() != need {
        return Err(FingerprintError::Truncated {
            need,
            have: bytes.len(),
        });
    }
    let body = &bytes[..need - 8];
    let stored = u64::from_le_bytes(bytes[need - 8..].try_into().unwrap());
    let computed = CRC64.checksum(body);
    if stored != computed {
        return Err(FingerprintError::ChecksumMismatch { stored, computed });
    }
    let postprocessed = match bytes[20] {
        0 => false,
        1 => true,
        other => {
            return Err(FingerprintError::Invalid(format!(
                "postprocessed flag {other}"
            )))
        }
    };
    if bytes[21..24] != [0, 0, 0] {
        return Err(FingerprintError::Invalid("reserved bytes not zero".into()));
    }
    let values = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let mut fp = Fingerprint::new(width, height, values, frames_used, postprocessed)?;
    fp.source_label = source_label.into();
    fp.created_at = created_at;
    Ok(fp)
}

pub fn write_prnufp(fp: &Fingerprint, path: &Path) -> Result<(), FingerprintError> {
    let bytes = encode_prnufp(fp)?;
    let mut file = fs::File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

pub fn read_prnufp(path: &Path) -> Result<Fingerprint, FingerprintError> {
    let bytes = fs::read(path)?;
    let modified = fs::metadata(path)?
        .modified()
        .map(DateTime::<Utc>::from)
        .unwrap_or_else(|_| Utc::now());
    decode_prnufp(&bytes, path.display().to_string(), modified)
}
