//! Camera fingerprint estimation from noise residuals.

mod format;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::denoise::{denoise_frame, DenoiseError, DenoiserConfig};
use crate::frame_io::{FrameSequence, LuminanceFrame};

pub use format::{decode_prnufp, encode_prnufp, read_prnufp, write_prnufp, PRNUFP_MAGIC};

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("no frames to estimate from")]
    Empty,
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {found_w}x{found_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        found_w: usize,
        found_h: usize,
    },
    #[error(transparent)]
    Denoise(#[from] DenoiseError),
    #[error("invalid fingerprint: {0}")]
    Invalid(String),
    #[error("not a PRNUFP1 file")]
    BadMagic,
    #[error("PRNUFP1 data truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("PRNUFP1 checksum mismatch (stored {stored:016x}, computed {computed:016x})")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Noise residual of one frame: the frame minus its denoised version.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

pub fn compute_residual(
    frame: &LuminanceFrame,
    cfg: &DenoiserConfig,
) -> Result<Residual, FingerprintError> {
    let denoised = denoise_frame(frame, cfg)?;
    let values = frame
        .samples()
        .iter()
        .zip(denoised.samples())
        .map(|(x, d)| x - d)
        .collect();
    Ok(Residual {
        width: frame.width(),
        height: frame.height(),
        values,
    })
}

/// Estimated sensor pattern with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    width: usize,
    height: usize,
    values: Vec<f64>,
    frames_used: usize,
    pub source_label: String,
    pub created_at: DateTime<Utc>,
    postprocessed: bool,
}

impl Fingerprint {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        frames_used: usize,
        postprocessed: bool,
    ) -> Result<Fingerprint, FingerprintError> {
        if width == 0 || height == 0 {
            return Err(FingerprintError::Invalid("zero dimension".into()));
        }
        if values.len() != width * height {
            return Err(FingerprintError::Invalid(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if frames_used == 0 {
            return Err(FingerprintError::Invalid("frames_used must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FingerprintError::Invalid("non-finite value".into()));
        }
        Ok(Fingerprint {
            width,
            height,
            values,
            frames_used,
            source_label: String::new(),
            created_at: Utc::now(),
            postprocessed,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.source_label = label.into();
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames_used(&self) -> usize {
        self.frames_used
    }

    pub fn postprocessed(&self) -> bool {
        self.postprocessed
    }

    /// Rounds values to single precision, the resolution of the `PRNUFP1`
    /// format, so that a save/load cycle is lossless.
    pub fn to_storage_precision(mut self) -> Self {
        for v in &mut self.values {
            *v = f64::from(*v as f32);
        }
        self
    }

    /// Returns a copy with values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Fingerprint {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Plain mean of residuals.
    #[default]
    Average,
    /// `sum(W_k * I_k) / sum(I_k^2)`.
    MaximumLikelihood,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FingerprintOptions {
    pub estimator: Estimator,
    /// Subtract row means, then column means.
    pub postprocess: bool,
}

impl Default for FingerprintOptions {
    fn default() -> Self {
        FingerprintOptions {
            estimator: Estimator::Average,
            postprocess: true,
        }
    }
}

/// Subtracts every row's mean, then every column's mean.
pub fn zero_mean_rows_cols(values: &mut [f64], width: usize, height: usize) {
    for row in values.chunks_mut(width) {
        let mean = row.iter().sum::<f64>() / width as f64;
        row.iter_mut().for_each(|v| *v -= mean);
    }
    for c in 0..width {
        let mean = (0..height).map(|r| values[r * width + c]).sum::<f64>() / height as f64;
        for r in 0..height {
            values[r * width + c] -= mean;
        }
    }
}

/// Streaming fingerprint estimator.
///
/// Residuals of a batch are computed in parallel, but always summed in
/// frame order, so the result does not depend on thread count or batching.
pub struct FingerprintAccumulator {
    width: usize,
    height: usize,
    cfg: DenoiserConfig,
    options: FingerprintOptions,
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    frames: usize,
}

impl FingerprintAccumulator {
    pub fn new(
        width: usize,
        height: usize,
        cfg: DenoiserConfig,
        options: FingerprintOptions,
    ) -> Result<Self, FingerprintError> {
        cfg.validate()?;
        let n = width * height;
        let denominator = match options.estimator {
            Estimator::Average => Vec::new(),
            Estimator::MaximumLikelihood => vec![0.0; n],
        };
        Ok(FingerprintAccumulator {
            width,
            height,
            cfg,
            options,
            numerator: vec![0.0; n],
            denominator,
            frames: 0,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn push_batch(&mut self, frames: &[LuminanceFrame]) -> Result<(), FingerprintError> {
        if let Some(f) = frames
            .iter()
            .find(|f| f.width() != self.width || f.height() != self.height)
        {
            return Err(FingerprintError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                found_w: f.width(),
                found_h: f.height(),
            });
        }
        let residuals: Vec<Residual> = frames
            .par_iter()
            .map(|f| compute_residual(f, &self.cfg))
            .collect::<Result<_, _>>()?;
        for (frame, residual) in frames.iter().zip(&residuals) {
            match self.options.estimator {
                Estimator::Average => {
                    for (acc, w) in self.numerator.iter_mut().zip(&residual.values) {
                        *acc += w;
                    }
                }
                Estimator::MaximumLikelihood => {
                    let samples = frame.samples();
                    let terms = self.numerator.iter_mut().zip(self.denominator.iter_mut());
                    for ((num, den), (w, s)) in terms.zip(residual.values.iter().zip(samples)) {
                        *num += w * s;
                        *den += s * s;
                    }
                }
            }
        }
        self.frames += frames.len();
        Ok(())
    }

    pub fn finish(self, source_label: impl Into<String>) -> Result<Fingerprint, FingerprintError> {
        if self.frames == 0 {
            return Err(FingerprintError::Empty);
        }
        let mut values = match self.options.estimator {
            Estimator::Average => {
                let n = self.frames as f64;
                self.numerator.into_iter().map(|s| s / n).collect::<Vec<_>>()
            }
            Estimator::MaximumLikelihood => self
                .numerator
                .iter()
                .zip(&self.denominator)
                .map(|(num, den)| if *den > 0.0 { num / den } else { 0.0 })
                .collect(),
        };
        if self.options.postprocess {
            zero_mean_rows_cols(&mut values, self.width, self.height);
        }
        Ok(Fingerprint::new(
            self.width,
            self.height,
            values,
            self.frames,
            self.options.postprocess,
        )?
        .with_label(source_label))
    }
}

fn batch_size() -> usize {
    (2 * rayon::current_num_threads()).max(4)
}

/// Averages the residuals of every frame in `seq`.
pub fn estimate_fingerprint(
    seq: &FrameSequence,
    cfg: &DenoiserConfig,
    postprocess: bool,
) -> Result<Fingerprint, FingerprintError> {
    estimate_fingerprint_with(
        seq,
        cfg,
        FingerprintOptions {
            estimator: Estimator::Average,
            postprocess,
        },
    )
}

pub fn estimate_fingerprint_with(
    seq: &FrameSequence,
    cfg: &DenoiserConfig,
    options: FingerprintOptions,
) -> Result<Fingerprint, FingerprintError> {
    estimate_from_frames(seq.frames(), cfg, options, seq.source_id.clone())
}

pub fn estimate_from_frames(
    frames: &[LuminanceFrame],
    cfg: &DenoiserConfig,
    options: FingerprintOptions,
    source_label: String,
) -> Result<Fingerprint, FingerprintError> {
    let first = frames.first().ok_or(FingerprintError::Empty)?;
    let mut acc = FingerprintAccumulator::new(first.width(), first.height(), cfg.clone(), options)?;
    for batch in frames.chunks(batch_size()) {
        acc.push_batch(batch)?;
    }
    acc.finish(source_label)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub min: f64,
    pub max: f64,
}

pub fn fingerprint_quality(fp: &Fingerprint) -> QualitySummary {
    let n = fp.values.len() as f64;
    let mean = fp.values.iter().sum::<f64>() / n;
    let variance = fp.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let (min, max) = fp
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    QualitySummary {
        mean,
        variance,
        min,
        max,
    }
}
