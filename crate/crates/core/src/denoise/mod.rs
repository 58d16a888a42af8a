//! Wavelet-domain locally adaptive Wiener denoising.
//!
//! The frame is decomposed with an orthogonal Daubechies wavelet. In every
//! detail band the local signal variance of each coefficient is estimated
//! from the mean of squares in several square windows, with the additive
//! noise variance subtracted; the smallest estimate wins. Coefficients are
//! then shrunk by `var / (var + sigma0^2)`. The approximation band is kept.

pub mod wavelet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::LuminanceFrame;
use wavelet::{reflect, Plane, Wavelet};

#[derive(Debug, Error, PartialEq)]
pub enum DenoiseError {
    #[error("{width}x{height} frame is too small for {levels} wavelet levels (needs at least {min} per side)")]
    FrameTooSmall {
        width: usize,
        height: usize,
        levels: usize,
        min: usize,
    },
    #[error("invalid denoiser configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    #[default]
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub wavelet_levels: usize,
    /// Variance of the noise to be removed, in squared luminance units.
    pub noise_variance: f64,
    /// Odd edge lengths of the local variance windows.
    pub wiener_window_sizes: Vec<usize>,
    pub boundary_mode: BoundaryMode,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        DenoiserConfig {
            wavelet_levels: 4,
            noise_variance: 9.0,
            wiener_window_sizes: vec![3, 5, 7, 9],
            boundary_mode: BoundaryMode::Symmetric,
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        if self.wavelet_levels == 0 {
            return Err(DenoiseError::InvalidConfig("wavelet_levels must be >= 1".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(DenoiseError::InvalidConfig("noise_variance must be > 0".into()));
        }
        if self.wiener_window_sizes.is_empty() {
            return Err(DenoiseError::InvalidConfig("at least one Wiener window is required".into()));
        }
        if let Some(w) = self
            .wiener_window_sizes
            .iter()
            .find(|&&w| w < 3 || w % 2 == 0)
        {
            return Err(DenoiseError::InvalidConfig(format!(
                "window size {w} must be odd and >= 3"
            )));
        }
        Ok(())
    }

    fn check_frame(&self, width: usize, height: usize) -> Result<(), DenoiseError> {
        self.validate()?;
        let min = 1usize
            .checked_shl(self.wavelet_levels as u32)
            .unwrap_or(usize::MAX);
        if width < min || height < min {
            return Err(DenoiseError::FrameTooSmall {
                width,
                height,
                levels: self.wavelet_levels,
                min,
            });
        }
        Ok(())
    }
}

/// Applies the filter and returns the noise-free estimate of `frame`.
pub fn denoise_frame(
    frame: &LuminanceFrame,
    cfg: &DenoiserConfig,
) -> Result<LuminanceFrame, DenoiseError> {
    let removed = removed_noise(frame, cfg)?;
    let samples = frame
        .samples()
        .iter()
        .zip(&removed.data)
        .map(|(x, r)| x - r)
        .collect();
    let out = LuminanceFrame::new(frame.width(), frame.height(), samples)
        .expect("denoised frame keeps the input shape");
    Ok(out.with_index(frame.frame_index).with_kind(frame.kind))
}

/// The part of `frame` the filter takes away.
///
/// Synthesis is linear, so reconstructing the shrunken decomposition equals
/// the input minus the reconstruction of what was shrunk off the details
/// (with a zero approximation band). Computing it this way leaves frames
/// whose details vanish bit-for-bit unchanged.
fn removed_noise(frame: &LuminanceFrame, cfg: &DenoiserConfig) -> Result<Plane, DenoiseError> {
    cfg.check_frame(frame.width(), frame.height())?;
    let wavelet = Wavelet::daubechies8();
    let input = Plane::new(frame.height(), frame.width(), frame.samples().to_vec());
    let mut dec = wavelet.forward(&input, cfg.wavelet_levels);
    for level in &mut dec.details {
        for band in level.bands_mut() {
            shrink_off(band, cfg);
        }
    }
    dec.approx.data.iter_mut().for_each(|v| *v = 0.0);
    Ok(wavelet.inverse(&dec))
}

/// Replaces each coefficient with the amount the Wiener gain removes from it.
fn shrink_off(band: &mut Plane, cfg: &DenoiserConfig) {
    let sigma2 = cfg.noise_variance;
    let variance = local_signal_variance(band, &cfg.wiener_window_sizes, sigma2);
    for (c, var) in band.data.iter_mut().zip(variance) {
        if *c != 0.0 {
            *c *= sigma2 / (var + sigma2);
        }
    }
}

/// `min_w max(0, mean_w(c^2) - sigma2)` per coefficient, with symmetric
/// extension at the band edges.
pub fn local_signal_variance(band: &Plane, windows: &[usize], sigma2: f64) -> Vec<f64> {
    let (rows, cols) = (band.rows, band.cols);
    let half = windows.iter().copied().max().unwrap_or(1) / 2;
    let prow = rows + 2 * half;
    let pcol = cols + 2 * half;
    // Summed-area table of squared coefficients over the padded band.
    let mut sat = vec![0.0; (prow + 1) * (pcol + 1)];
    for r in 0..prow {
        let src_r = reflect(r as isize - half as isize, rows);
        let mut run = 0.0;
        for c in 0..pcol {
            let v = band.at(src_r, reflect(c as isize - half as isize, cols));
            run += v * v;
            sat[(r + 1) * (pcol + 1) + c + 1] = sat[r * (pcol + 1) + c + 1] + run;
        }
    }
    let mut out = vec![f64::INFINITY; rows * cols];
    for &w in windows {
        let h = w / 2;
        let area = (w * w) as f64;
        for r in 0..rows {
            let (r0, r1) = (r + half - h, r + half + h + 1);
            for c in 0..cols {
                let (c0, c1) = (c + half - h, c + half + h + 1);
                let sum = sat[r1 * (pcol + 1) + c1] - sat[r0 * (pcol + 1) + c1]
                    - sat[r1 * (pcol + 1) + c0]
                    + sat[r0 * (pcol + 1) + c0];
                let var = (sum / area - sigma2).max(0.0);
                let slot = &mut out[r * cols + c];
                if var < *slot {
                    *slot = var;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn noisy_frame(size: usize, sigma: f64, seed: u64) -> LuminanceFrame {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma).unwrap();
        let samples = (0..size * size).map(|_| 128.0 + normal.sample(&mut rng)).collect();
        LuminanceFrame::new(size, size, samples).unwrap()
    }

    fn variance(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
    }

    #[test]
    fn constant_frame_is_a_fixed_point() {
        let frame = LuminanceFrame::constant(64, 48, 128.0).unwrap();
        let out = denoise_frame(&frame, &DenoiserConfig::default()).unwrap();
        assert_eq!(out.samples(), frame.samples());
    }

    #[test]
    fn shape_preserved_for_odd_sizes() {
        let frame = noisy_frame(37, 2.0, 1);
        let frame = LuminanceFrame::new(37, 37, frame.into_samples()).unwrap();
        let out = denoise_frame(&frame, &DenoiserConfig::default()).unwrap();
        assert_eq!((out.width(), out.height()), (37, 37));
        let rect = LuminanceFrame::constant(19, 33, 10.0).unwrap();
        let out = denoise_frame(&rect, &DenoiserConfig::default()).unwrap();
        assert_eq!((out.width(), out.height()), (19, 33));
    }

    #[test]
    fn too_small_for_depth() {
        let frame = LuminanceFrame::constant(15, 64, 1.0).unwrap();
        assert_eq!(
            denoise_frame(&frame, &DenoiserConfig::default()),
            Err(DenoiseError::FrameTooSmall {
                width: 15,
                height: 64,
                levels: 4,
                min: 16
            })
        );
        let cfg = DenoiserConfig {
            wavelet_levels: 1,
            ..DenoiserConfig::default()
        };
        assert!(denoise_frame(&frame, &cfg).is_ok());
    }

    #[test]
    fn config_validation() {
        let bad = [
            DenoiserConfig { wavelet_levels: 0, ..Default::default() },
            DenoiserConfig { noise_variance: 0.0, ..Default::default() },
            DenoiserConfig { wiener_window_sizes: vec![3, 4], ..Default::default() },
            DenoiserConfig { wiener_window_sizes: vec![1], ..Default::default() },
            DenoiserConfig { wiener_window_sizes: vec![], ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let json = r#"{"wavelet_levels": 3}"#;
        let cfg: DenoiserConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.wiener_window_sizes, vec![3, 5, 7, 9]);
    }

    #[test]
    fn gaussian_noise_is_suppressed() {
        for seed in 0..10 {
            let frame = noisy_frame(256, 3.0, seed);
            let out = denoise_frame(&frame, &DenoiserConfig::default()).unwrap();
            let ratio = variance(out.samples()) / 9.0;
            assert!(ratio < 0.2, "seed {seed}: output/input variance {ratio}");
        }
    }

    #[test]
    fn local_variance_of_flat_band() {
        let band = Plane::new(5, 5, vec![4.0; 25]);
        let v = local_signal_variance(&band, &[3, 5], 9.0);
        assert!(v.iter().all(|&x| (x - 7.0).abs() < 1e-12));
        let v = local_signal_variance(&band, &[3], 20.0);
        assert!(v.iter().all(|&x| x == 0.0));
    }
}
