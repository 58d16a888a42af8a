use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{FrameError, FrameKind, FrameSequence, LuminanceFrame};

/// Decodes a binary (`P5`, maxval 255) PGM image.
pub fn read_pgm(bytes: &[u8], path: &Path) -> Result<LuminanceFrame, FrameError> {
    let not_pgm = |reason: &str| FrameError::NotPgm {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(not_pgm("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Whitespace and `#` comments may separate header fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(not_pgm("malformed header"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| not_pgm("header value out of range"))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(not_pgm("zero dimension"));
    }
    if maxval != 255 {
        return Err(not_pgm("maxval must be 255"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(not_pgm("missing separator before raster"));
    }
    pos += 1;
    let raster = &bytes[pos..];
    if raster.len() < width * height {
        return Err(not_pgm("raster truncated"));
    }
    LuminanceFrame::from_bytes(width, height, &raster[..width * height])
}

pub fn write_pgm<W: Write>(frame: &LuminanceFrame, out: &mut W) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", frame.width(), frame.height())?;
    out.write_all(&frame.to_bytes())
}

/// Parses `<filename> <I|P|B>` lines. Blank lines and `#` comments are skipped.
pub fn parse_kind_manifest(text: &str) -> Result<HashMap<String, FrameKind>, FrameError> {
    let mut kinds = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| FrameError::BadManifest {
            line: i + 1,
            reason,
        };
        let (name, kind) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| bad("expected `<filename> <I|P|B>`".into()))?;
        let kind = FrameKind::parse(kind.trim())
            .ok_or_else(|| bad(format!("unknown frame kind `{kind}`")))?;
        kinds.insert(name.trim().to_string(), kind);
    }
    Ok(kinds)
}

/// Loads every `.pgm` file in `dir`, sorted by file name.
pub fn load_frame_dir(dir: &Path, manifest: Option<&Path>) -> Result<FrameSequence, FrameError> {
    let mut names: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let is_pgm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
        if is_pgm && entry.file_type()?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();

    let kinds = match manifest {
        Some(path) => parse_kind_manifest(&fs::read_to_string(path)?)?,
        None => HashMap::new(),
    };
    let mut listed: Vec<&String> = kinds.keys().collect();
    listed.sort();
    if let Some(missing) = listed.into_iter().find(|k| names.binary_search(k).is_err()) {
        return Err(FrameError::ManifestMissingFile(missing.clone()));
    }

    let mut frames: Vec<LuminanceFrame> = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let path = dir.join(name);
        let frame = read_pgm(&fs::read(&path)?, &path)?
            .with_index(i)
            .with_kind(kinds.get(name).copied().unwrap_or_default());
        if let Some(first) = frames.first() {
            if (first.width(), first.height()) != (frame.width(), frame.height()) {
                return Err(FrameError::MixedDimensions {
                    path,
                    want_w: first.width(),
                    want_h: first.height(),
                    found_w: frame.width(),
                    found_h: frame.height(),
                });
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, dir.display().to_string(), None)
}
