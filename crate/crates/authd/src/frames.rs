use std::path::Path;

use base64::Engine;
use prnu_core::frame_io::parse_y4m;
use prnu_core::sensor_sim::load_sequence;
use prnu_core::FrameSequence;

use crate::GatewayError;

const Y4M_SIGNATURE: &[u8] = b"YUV4MPEG2";

/// Interprets a `frames_ref`: base64 text that decodes to a Y4M stream is
/// inline video, anything else is a path to a Y4M file or frame directory.
pub fn resolve_frames_ref(frames_ref: &str, allow_paths: bool) -> Result<FrameSequence, GatewayError> {
    let trimmed = frames_ref.trim();
    if trimmed.is_empty() {
        return Err(GatewayError::InvalidInput("frames_ref is empty".into()));
    }
    if let Ok(bytes) = base64::engine::general_purpose::STANDARD.decode(trimmed) {
        if bytes.starts_with(Y4M_SIGNATURE) {
            return parse_y4m(&bytes).map_err(|e| GatewayError::InvalidInput(e.to_string()));
        }
    }
    if !allow_paths {
        return Err(GatewayError::InvalidInput(
            "frames_ref is not inline base64 Y4M and server-side paths are disabled".into(),
        ));
    }
    load_sequence(Path::new(trimmed)).map_err(|e| GatewayError::InvalidInput(e.to_string()))
}
