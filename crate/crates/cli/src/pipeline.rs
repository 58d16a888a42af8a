//! Fingerprinting straight from files, streaming Y4M input so that long or
//! high-resolution videos never sit in memory whole.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use prnu_core::frame_io::{
    registration_stride, select_query_frames, select_registration_frames, Y4mReader,
};
use prnu_core::sensor_sim::load_sequence;
use prnu_core::{
    estimate_from_frames, DenoiserConfig, Fingerprint, FingerprintAccumulator,
    FingerprintOptions, FrameSequence,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Pick {
    /// Every frame, or the first `count`.
    All,
    /// One frame per second (or the flagged I-frames).
    Registration,
    /// The first `count` frames.
    Query,
}

fn batch_len() -> usize {
    (2 * rayon::current_num_threads()).max(4)
}

fn open_y4m(path: &Path) -> Result<Y4mReader<BufReader<File>>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    Ok(Y4mReader::new(BufReader::new(file))?)
}

/// Estimates a fingerprint from a Y4M file or a PGM frame directory.
pub fn fingerprint_path(
    path: &Path,
    pick: Pick,
    count: Option<usize>,
    cfg: &DenoiserConfig,
    options: FingerprintOptions,
) -> Result<Fingerprint, CliError> {
    if count == Some(0) {
        return Err(CliError::new("usage", "frame count must be >= 1"));
    }
    let label = path.display().to_string();
    if path.is_dir() {
        let seq = load_sequence(path)?;
        let frames = match (pick, count) {
            (Pick::Registration, c) => select_registration_frames(&seq, c.unwrap_or(usize::MAX))?.sequence,
            (_, Some(c)) => select_query_frames(&seq, c)?.sequence,
            (_, None) => seq,
        };
        return Ok(estimate_from_frames(frames.frames(), cfg, options, label)?);
    }

    let mut reader = open_y4m(path)?;
    let header = reader.header().clone();
    let stride = match pick {
        Pick::Registration => registration_stride(header.fps()),
        Pick::All | Pick::Query => 1,
    };
    let limit = count.unwrap_or(usize::MAX);
    let mut acc = FingerprintAccumulator::new(header.width, header.height, cfg.clone(), options)?;
    let mut batch = Vec::with_capacity(batch_len());
    let (mut seen, mut taken) = (0usize, 0usize);
    while taken < limit {
        let Some(frame) = reader.next_frame()? else { break };
        if seen % stride == 0 {
            batch.push(frame);
            taken += 1;
            if batch.len() == batch_len() {
                acc.push_batch(&batch)?;
                batch.clear();
            }
        }
        seen += 1;
    }
    if !batch.is_empty() {
        acc.push_batch(&batch)?;
    }
    Ok(acc.finish(label)?)
}

/// Loads at most `limit` frames; only as much of a Y4M file as needed is
/// read.
pub fn load_frames(path: &Path, limit: Option<usize>) -> Result<FrameSequence, CliError> {
    if path.is_dir() {
        return Ok(load_sequence(path)?);
    }
    let mut reader = open_y4m(path)?;
    let fps = reader.header().fps();
    let mut frames = Vec::new();
    while frames.len() < limit.unwrap_or(usize::MAX) {
        match reader.next_frame()? {
            Some(f) => frames.push(f),
            None => break,
        }
    }
    Ok(FrameSequence::new(frames, path.display().to_string(), fps)?)
}
