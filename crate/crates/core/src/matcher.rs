//! Same-camera decisions by normalized cross-correlation and
//! peak-to-correlation energy (PCE).

use rustfft::FftDirection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::Fingerprint;
use crate::spectral::{fft2, to_complex};

/// Decision threshold on PCE.
pub const DEFAULT_PCE_THRESHOLD: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("fingerprint dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: usize,
        a_h: usize,
        b_w: usize,
        b_h: usize,
    },
    #[error("fingerprint has zero variance")]
    DegenerateInput,
    #[error("correlation surface is zero outside the peak; PCE undefined")]
    UndefinedPce,
    #[error("exclusion neighborhood covers the whole {rows}x{cols} surface")]
    ExclusionTooLarge { rows: usize, cols: usize },
    #[error("invalid matcher configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    #[default]
    PeakSearch,
    ZeroShiftOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    pub pce_threshold: f64,
    /// Half-width of the square neighborhood around the peak left out of the
    /// background energy (5 gives 11x11).
    pub peak_exclusion_radius: usize,
    pub search_mode: SearchMode,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            pce_threshold: DEFAULT_PCE_THRESHOLD,
            peak_exclusion_radius: 5,
            search_mode: SearchMode::PeakSearch,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.pce_threshold.is_finite() && self.pce_threshold > 0.0) {
            return Err(MatchError::InvalidConfig("pce_threshold must be > 0".into()));
        }
        Ok(())
    }

    pub fn accepts(&self, pce: f64) -> bool {
        pce > self.pce_threshold
    }
}

/// Normalized circular cross-correlation indexed by shift `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl CorrelationSurface {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PceReport {
    pub pce: f64,
    pub peak_row: usize,
    pub peak_col: usize,
    pub peak_corr: f64,
    pub accepted: bool,
    pub threshold: f64,
}

fn centered(values: &[f64]) -> Result<(Vec<f64>, f64), MatchError> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let out: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(MatchError::DegenerateInput);
    }
    Ok((out, norm))
}

/// `surface(s) = sum_x a'(x) b'(x + s) / (|a'| |b'|)` over circular shifts,
/// with `a'`, `b'` the mean-subtracted inputs.
pub fn cross_correlate(a: &Fingerprint, b: &Fingerprint) -> Result<CorrelationSurface, MatchError> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(MatchError::DimensionMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    correlate_arrays(a.values(), b.values(), a.height(), a.width())
}

/// [`cross_correlate`] on bare row-major arrays.
pub fn correlate_arrays(
    a: &[f64],
    b: &[f64],
    rows: usize,
    cols: usize,
) -> Result<CorrelationSurface, MatchError> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows * cols);
    let (a, norm_a) = centered(a)?;
    let (b, norm_b) = centered(b)?;
    let mut fa = to_complex(&a);
    let mut fb = to_complex(&b);
    fft2(&mut fa, rows, cols, FftDirection::Forward);
    fft2(&mut fb, rows, cols, FftDirection::Forward);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    fft2(&mut fa, rows, cols, FftDirection::Inverse);
    let scale = 1.0 / ((rows * cols) as f64 * norm_a * norm_b);
    Ok(CorrelationSurface {
        rows,
        cols,
        values: fa.iter().map(|z| z.re * scale).collect(),
    })
}

/// Scores a correlation surface.
///
/// The peak is the largest `|surface|` among the allowed shifts (first in
/// row-major order on ties). PCE is the signed squared peak over the mean
/// square of the surface outside a circular square neighborhood of the peak.
pub fn pce(surface: &CorrelationSurface, cfg: &MatcherConfig) -> Result<PceReport, MatchError> {
    cfg.validate()?;
    let (rows, cols) = (surface.rows, surface.cols);
    let (peak_row, peak_col) = match cfg.search_mode {
        SearchMode::ZeroShiftOnly => (0, 0),
        SearchMode::PeakSearch => {
            let mut best = 0;
            for (i, v) in surface.values.iter().enumerate() {
                if v.abs() > surface.values[best].abs() {
                    best = i;
                }
            }
            (best / cols, best % cols)
        }
    };
    let peak_corr = surface.at(peak_row, peak_col);

    let excluded_rows = wrapped_window(peak_row, cfg.peak_exclusion_radius, rows);
    let excluded_cols = wrapped_window(peak_col, cfg.peak_exclusion_radius, cols);
    let excluded = excluded_rows.iter().filter(|&&x| x).count() * excluded_cols.iter().filter(|&&x| x).count();
    let total = rows * cols;
    if excluded >= total {
        return Err(MatchError::ExclusionTooLarge { rows, cols });
    }
    let mut energy = 0.0;
    for (row, &skip_row) in surface.values.chunks_exact(cols).zip(&excluded_rows) {
        for (&v, &skip_col) in row.iter().zip(&excluded_cols) {
            if !(skip_row && skip_col) {
                energy += v * v;
            }
        }
    }
    let background = energy / (total - excluded) as f64;
    // NaN must also land here.
    if background.is_nan() || background <= 0.0 {
        return Err(MatchError::UndefinedPce);
    }
    let pce = peak_corr.signum() * peak_corr * peak_corr / background;
    Ok(PceReport {
        pce,
        peak_row,
        peak_col,
        peak_corr,
        accepted: cfg.accepts(pce),
        threshold: cfg.pce_threshold,
    })
}

/// Marks indices within `radius` of `center` on a ring of length `n`.
fn wrapped_window(center: usize, radius: usize, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    if 2 * radius + 1 >= n {
        mask.iter_mut().for_each(|m| *m = true);
        return mask;
    }
    for d in 0..=2 * radius {
        mask[(center + n + d - radius) % n] = true;
    }
    mask
}

pub fn match_fingerprints(
    known: &Fingerprint,
    query: &Fingerprint,
    cfg: &MatcherConfig,
) -> Result<PceReport, MatchError> {
    cfg.validate()?;
    pce(&cross_correlate(known, query)?, cfg)
}
