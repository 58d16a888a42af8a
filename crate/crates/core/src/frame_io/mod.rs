//! Luminance frames and the raw containers they are read from.
//!
//! Two codec-free inputs are supported: YUV4MPEG2 streams ([`parse_y4m`],
//! [`Y4mReader`]) and directories of binary PGM files ([`load_frame_dir`])
//! with an optional sidecar naming each file's coding type. Only the luma
//! plane is kept.

mod pgm;
mod y4m;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use pgm::{load_frame_dir, parse_kind_manifest, read_pgm, write_pgm};
pub use y4m::{parse_y4m, write_y4m, Y4mChroma, Y4mHeader, Y4mReader, Y4mWriter};

/// Stride used by [`select_registration_frames`] when the frame rate is unknown.
pub const DEFAULT_REGISTRATION_STRIDE: usize = 30;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("missing YUV4MPEG2 signature")]
    BadSignature,
    #[error("malformed Y4M header: {0}")]
    BadHeader(String),
    #[error("unsupported Y4M chroma tag `{0}`")]
    UnsupportedChroma(String),
    #[error("malformed FRAME marker at byte offset {offset}")]
    BadFrameMarker { offset: u64 },
    #[error(
        "truncated payload in frame {frame} at byte offset {offset}: expected {expected} bytes, got {available}"
    )]
    Truncated {
        frame: usize,
        offset: u64,
        expected: usize,
        available: usize,
    },
    #[error("{path}: not a binary PGM file ({reason})")]
    NotPgm { path: PathBuf, reason: String },
    #[error("{path}: frame is {found_w}x{found_h}, expected {want_w}x{want_h}")]
    MixedDimensions {
        path: PathBuf,
        want_w: usize,
        want_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error("manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error("manifest names `{0}`, which is not in the frame directory")]
    ManifestMissingFile(String),
    #[error("no frames found")]
    Empty,
    #[error("invalid frame: {0}")]
    Invalid(String),
    #[error("frame count must be at least 1")]
    ZeroCount,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coding type of a frame in its source video, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FrameKind {
    I,
    P,
    B,
    #[default]
    Unknown,
}

impl FrameKind {
    pub fn parse(token: &str) -> Option<FrameKind> {
        match token {
            "I" => Some(FrameKind::I),
            "P" => Some(FrameKind::P),
            "B" => Some(FrameKind::B),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FrameKind::I => "I",
            FrameKind::P => "P",
            FrameKind::B => "B",
            FrameKind::Unknown => "?",
        }
    }
}

/// One grayscale frame, row-major, nominal range `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LuminanceFrame {
    width: usize,
    height: usize,
    samples: Vec<f64>,
    pub frame_index: usize,
    pub kind: FrameKind,
}

impl LuminanceFrame {
    pub fn new(width: usize, height: usize, samples: Vec<f64>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Invalid(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if samples.len() != width * height {
            return Err(FrameError::Invalid(format!(
                "{} samples for a {width}x{height} frame",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FrameError::Invalid(format!("sample {i} is not finite")));
        }
        Ok(LuminanceFrame {
            width,
            height,
            samples,
            frame_index: 0,
            kind: FrameKind::Unknown,
        })
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self, FrameError> {
        Self::new(width, height, bytes.iter().map(|&b| f64::from(b)).collect())
    }

    pub fn constant(width: usize, height: usize, level: f64) -> Result<Self, FrameError> {
        Self::new(width, height, vec![level; width * height])
    }

    pub fn with_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn with_kind(mut self, kind: FrameKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Samples rounded and clamped to 8 bits, as written to Y4M/PGM.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.samples
            .iter()
            .map(|&v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Ordered, non-empty run of equally sized frames from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<LuminanceFrame>,
    pub source_id: String,
    pub declared_fps: Option<f64>,
}

impl FrameSequence {
    pub fn new(
        frames: Vec<LuminanceFrame>,
        source_id: impl Into<String>,
        declared_fps: Option<f64>,
    ) -> Result<Self, FrameError> {
        let first = frames.first().ok_or(FrameError::Empty)?;
        let (w, h) = (first.width, first.height);
        for pair in frames.windows(2) {
            if pair[1].frame_index <= pair[0].frame_index {
                return Err(FrameError::Invalid(format!(
                    "frame indices not strictly increasing ({} then {})",
                    pair[0].frame_index, pair[1].frame_index
                )));
            }
        }
        if let Some(f) = frames.iter().find(|f| f.width != w || f.height != h) {
            return Err(FrameError::Invalid(format!(
                "frame {} is {}x{}, sequence is {w}x{h}",
                f.frame_index, f.width, f.height
            )));
        }
        Ok(FrameSequence {
            frames,
            source_id: source_id.into(),
            declared_fps,
        })
    }

    /// Builds a sequence numbering the frames `0..n` in the given order.
    pub fn from_frames_renumbered(
        frames: Vec<LuminanceFrame>,
        source_id: impl Into<String>,
        declared_fps: Option<f64>,
    ) -> Result<Self, FrameError> {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.with_index(i))
            .collect();
        Self::new(frames, source_id, declared_fps)
    }

    pub fn frames(&self) -> &[LuminanceFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<LuminanceFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    fn subset(&self, picked: Vec<LuminanceFrame>) -> FrameSequence {
        FrameSequence {
            frames: picked,
            source_id: self.source_id.clone(),
            declared_fps: self.declared_fps,
        }
    }
}

/// Output of a frame selector.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub sequence: FrameSequence,
    /// Fewer frames were available than requested.
    pub short_supply: bool,
}

/// Picks frames for building a registration fingerprint.
///
/// Frames flagged as I-frames win when present. Otherwise one frame per
/// second of video is taken, using the declared frame rate as the stride.
pub fn select_registration_frames(
    seq: &FrameSequence,
    count: usize,
) -> Result<Selection, FrameError> {
    if count == 0 {
        return Err(FrameError::ZeroCount);
    }
    if seq.is_empty() {
        return Err(FrameError::Empty);
    }
    let intra: Vec<&LuminanceFrame> = seq.frames.iter().filter(|f| f.kind == FrameKind::I).collect();
    let picked: Vec<LuminanceFrame> = if intra.is_empty() {
        let stride = registration_stride(seq.declared_fps);
        seq.frames.iter().step_by(stride).take(count).cloned().collect()
    } else {
        intra.into_iter().take(count).cloned().collect()
    };
    let short_supply = picked.len() < count;
    Ok(Selection {
        sequence: seq.subset(picked),
        short_supply,
    })
}

/// Frames between registration picks when no I-frames are flagged: one per
/// second at the declared rate.
pub fn registration_stride(declared_fps: Option<f64>) -> usize {
    declared_fps
        .filter(|fps| fps.is_finite() && *fps > 0.0)
        .map(|fps| (fps.round() as usize).max(1))
        .unwrap_or(DEFAULT_REGISTRATION_STRIDE)
}

/// Takes the first `count` frames of any kind.
pub fn select_query_frames(seq: &FrameSequence, count: usize) -> Result<Selection, FrameError> {
    if count == 0 {
        return Err(FrameError::ZeroCount);
    }
    if seq.is_empty() {
        return Err(FrameError::Empty);
    }
    let picked: Vec<LuminanceFrame> = seq.frames.iter().take(count).cloned().collect();
    let short_supply = picked.len() < count;
    Ok(Selection {
        sequence: seq.subset(picked),
        short_supply,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seq_with_kinds(kinds: &[FrameKind], fps: Option<f64>) -> FrameSequence {
        let frames = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                LuminanceFrame::constant(2, 2, i as f64)
                    .unwrap()
                    .with_index(i)
                    .with_kind(k)
            })
            .collect();
        FrameSequence::new(frames, "test", fps).unwrap()
    }

    fn indices(sel: &Selection) -> Vec<usize> {
        sel.sequence.frames().iter().map(|f| f.frame_index).collect()
    }

    #[test]
    fn registration_strides_one_frame_per_second() {
        let seq = seq_with_kinds(&[FrameKind::Unknown; 1800], Some(30.0));
        let sel = select_registration_frames(&seq, 60).unwrap();
        assert_eq!(indices(&sel), (0..60).map(|i| i * 30).collect::<Vec<_>>());
        assert!(!sel.short_supply);
    }

    #[test]
    fn registration_default_stride_without_fps() {
        let seq = seq_with_kinds(&[FrameKind::Unknown; 95], None);
        let sel = select_registration_frames(&seq, 60).unwrap();
        assert_eq!(indices(&sel), vec![0, 30, 60, 90]);
        assert!(sel.short_supply);
    }

    #[test]
    fn registration_prefers_intra_frames() {
        let mut kinds = vec![FrameKind::P; 300];
        for i in [3, 50, 100, 150, 299] {
            kinds[i] = FrameKind::I;
        }
        let seq = seq_with_kinds(&kinds, Some(30.0));
        let sel = select_registration_frames(&seq, 60).unwrap();
        assert_eq!(indices(&sel), vec![3, 50, 100, 150, 299]);
        assert!(sel.short_supply);
    }

    #[test]
    fn registration_takes_exactly_the_sixty_intra_frames() {
        let mut kinds = vec![FrameKind::B; 1800];
        for i in 0..60 {
            kinds[i * 30 + 7] = FrameKind::I;
        }
        let seq = seq_with_kinds(&kinds, Some(30.0));
        let sel = select_registration_frames(&seq, 60).unwrap();
        assert_eq!(sel.sequence.len(), 60);
        assert!(sel.sequence.frames().iter().all(|f| f.kind == FrameKind::I));
        assert!(!sel.short_supply);
    }

    #[test]
    fn query_takes_leading_frames() {
        let seq = seq_with_kinds(&[FrameKind::Unknown; 120], Some(25.0));
        let sel = select_query_frames(&seq, 100).unwrap();
        assert_eq!(indices(&sel), (0..100).collect::<Vec<_>>());
        assert!(!sel.short_supply);

        let short = seq_with_kinds(&[FrameKind::Unknown; 10], None);
        let sel = select_query_frames(&short, 100).unwrap();
        assert_eq!(sel.sequence.len(), 10);
        assert!(sel.short_supply);

        let sel = select_query_frames(&seq, 1).unwrap();
        assert_eq!(indices(&sel), vec![0]);
    }

    #[test]
    fn zero_count_rejected() {
        let seq = seq_with_kinds(&[FrameKind::Unknown; 3], None);
        assert!(matches!(select_query_frames(&seq, 0), Err(FrameError::ZeroCount)));
        assert!(matches!(
            select_registration_frames(&seq, 0),
            Err(FrameError::ZeroCount)
        ));
    }

    #[test]
    fn sequence_invariants_enforced() {
        assert!(matches!(FrameSequence::new(vec![], "x", None), Err(FrameError::Empty)));
        let a = LuminanceFrame::constant(2, 2, 0.0).unwrap();
        let b = LuminanceFrame::constant(2, 3, 0.0).unwrap().with_index(1);
        assert!(FrameSequence::new(vec![a.clone(), b], "x", None).is_err());
        assert!(FrameSequence::new(vec![a.clone(), a], "x", None).is_err());
        assert!(LuminanceFrame::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
        assert!(LuminanceFrame::new(0, 2, vec![]).is_err());
    }

    fn kind_strategy() -> impl Strategy<Value = FrameKind> {
        prop_oneof![
            Just(FrameKind::I),
            Just(FrameKind::P),
            Just(FrameKind::B),
            Just(FrameKind::Unknown)
        ]
    }

    proptest! {
        #[test]
        fn registration_is_ordered_subsequence(
            kinds in proptest::collection::vec(kind_strategy(), 1..200),
            fps in proptest::option::of(1.0f64..60.0),
            count in 1usize..80,
        ) {
            let seq = seq_with_kinds(&kinds, fps);
            let sel = select_registration_frames(&seq, count).unwrap();
            let again = select_registration_frames(&seq, count).unwrap();
            prop_assert_eq!(&sel, &again);
            prop_assert!(sel.sequence.len() <= count);
            prop_assert_eq!(sel.short_supply, sel.sequence.len() < count);
            let picked = indices(&sel);
            prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
            for f in sel.sequence.frames() {
                prop_assert_eq!(f, &seq.frames()[f.frame_index]);
            }
        }
    }
}
