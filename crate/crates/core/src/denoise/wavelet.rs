//! Separable orthogonal 2-D wavelet transform with half-sample symmetric
//! boundary extension.
//!
//! Each analysis step maps a length-`n` signal to `(n + taps - 1) / 2`
//! coefficients per band, which makes the transform exactly invertible for
//! any length (the same layout as PyWavelets' `symmetric` mode).

/// Daubechies 8-tap (four vanishing moments) decomposition low-pass filter.
pub const DAUBECHIES8_LOW: [f64; 8] = [
    -0.010_597_401_785_069_032,
    0.032_883_011_666_885_2,
    0.030_841_381_835_560_764,
    -0.187_034_811_719_093_08,
    -0.027_983_769_416_859_854,
    0.630_880_767_929_858_9,
    0.714_846_570_552_915_6,
    0.230_377_813_308_896_5,
];

/// Quadrature mirror of a low-pass filter: `hi[j] = (-1)^(j+1) lo[n-1-j]`.
pub fn quadrature_mirror(lo: &[f64]) -> Vec<f64> {
    let n = lo.len();
    (0..n)
        .map(|j| if j % 2 == 0 { -lo[n - 1 - j] } else { lo[n - 1 - j] })
        .collect()
}

/// Half-sample symmetric index reflection: `.. x1 x0 | x0 x1 .. xn-1 | xn-1 ..`.
#[inline]
pub fn reflect(k: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = k.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

/// Row-major 2-D array of coefficients or samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Plane {
        assert_eq!(data.len(), rows * cols, "plane data length");
        Plane { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Plane {
        Plane::new(rows, cols, vec![0.0; rows * cols])
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn transpose(&self) -> Plane {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Plane::new(self.cols, self.rows, out)
    }
}

/// Detail bands of one decomposition level. The first letter names the
/// filter applied along rows, the second the filter applied along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DetailBands {
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
    /// Size of the plane this level was computed from.
    pub input_rows: usize,
    pub input_cols: usize,
}

impl DetailBands {
    pub fn bands(&self) -> [&Plane; 3] {
        [&self.lh, &self.hl, &self.hh]
    }

    pub fn bands_mut(&mut self) -> [&mut Plane; 3] {
        [&mut self.lh, &mut self.hl, &mut self.hh]
    }
}

/// Multi-level decomposition: `details[0]` is the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub approx: Plane,
    pub details: Vec<DetailBands>,
}

#[derive(Debug, Clone)]
pub struct Wavelet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Default for Wavelet {
    fn default() -> Self {
        Wavelet::daubechies8()
    }
}

impl Wavelet {
    pub fn daubechies8() -> Wavelet {
        Wavelet::from_low_pass(&DAUBECHIES8_LOW)
    }

    pub fn from_low_pass(lo: &[f64]) -> Wavelet {
        assert!(lo.len() >= 2 && lo.len().is_multiple_of(2), "filter length must be even");
        Wavelet {
            lo: lo.to_vec(),
            hi: quadrature_mirror(lo),
        }
    }

    pub fn taps(&self) -> usize {
        self.lo.len()
    }

    pub fn low_pass(&self) -> &[f64] {
        &self.lo
    }

    pub fn high_pass(&self) -> &[f64] {
        &self.hi
    }

    /// Number of coefficients per band for a length-`n` input.
    pub fn band_len(&self, n: usize) -> usize {
        (n + self.taps() - 1) / 2
    }

    /// One analysis step: `lo[k] = sum_j h[j] x[2k+1-j]`, same for `hi`.
    ///
    /// The high-pass sum is taken over differences from `x[2k+1]`. The taps
    /// sum to zero, so this is the same transform, but a locally constant
    /// signal yields detail coefficients that are exactly zero.
    pub fn analyze(&self, x: &[f64], lo_out: &mut [f64], hi_out: &mut [f64]) {
        let n = x.len();
        let taps = self.taps();
        let pad = taps - 1;
        let ext: Vec<f64> = (0..n + 2 * pad)
            .map(|k| x[reflect(k as isize - pad as isize, n)])
            .collect();
        for k in 0..self.band_len(n) {
            // ext index of x[2k+1-j] is 2k+1-j+pad.
            let top = 2 * k + 1 + pad;
            let anchor = ext[top];
            let mut a = 0.0;
            let mut d = 0.0;
            for j in 0..taps {
                let v = ext[top - j];
                a += self.lo[j] * v;
                d += self.hi[j] * (v - anchor);
            }
            lo_out[k] = a;
            hi_out[k] = d;
        }
    }

    /// Inverse of [`Wavelet::analyze`] for an original length of `out.len()`.
    pub fn synthesize(&self, lo: &[f64], hi: &[f64], out: &mut [f64]) {
        let taps = self.taps() as isize;
        let len = lo.len() as isize;
        for (m, slot) in out.iter_mut().enumerate() {
            let m = m as isize;
            // Coefficient k touches x[m] through tap 2k+1-m in [0, taps).
            let k_min = ((m - 1).max(0) + 1) / 2;
            let k_max = ((m + taps - 2) / 2).min(len - 1);
            let mut acc = 0.0;
            for k in k_min..=k_max {
                let j = (2 * k + 1 - m) as usize;
                acc += lo[k as usize] * self.lo[j] + hi[k as usize] * self.hi[j];
            }
            *slot = acc;
        }
    }

    fn analyze_rows(&self, p: &Plane) -> (Plane, Plane) {
        let out_cols = self.band_len(p.cols);
        let mut lo = Plane::zeros(p.rows, out_cols);
        let mut hi = Plane::zeros(p.rows, out_cols);
        for r in 0..p.rows {
            self.analyze(
                &p.data[r * p.cols..(r + 1) * p.cols],
                &mut lo.data[r * out_cols..(r + 1) * out_cols],
                &mut hi.data[r * out_cols..(r + 1) * out_cols],
            );
        }
        (lo, hi)
    }

    fn synthesize_rows(&self, lo: &Plane, hi: &Plane, cols: usize) -> Plane {
        let mut out = Plane::zeros(lo.rows, cols);
        for r in 0..lo.rows {
            self.synthesize(
                &lo.data[r * lo.cols..(r + 1) * lo.cols],
                &hi.data[r * hi.cols..(r + 1) * hi.cols],
                &mut out.data[r * cols..(r + 1) * cols],
            );
        }
        out
    }

    /// Single-level 2-D analysis.
    pub fn forward_level(&self, p: &Plane) -> (Plane, DetailBands) {
        let (row_lo, row_hi) = self.analyze_rows(p);
        let (ll, lh) = self.analyze_rows(&row_lo.transpose());
        let (hl, hh) = self.analyze_rows(&row_hi.transpose());
        (
            ll.transpose(),
            DetailBands {
                lh: lh.transpose(),
                hl: hl.transpose(),
                hh: hh.transpose(),
                input_rows: p.rows,
                input_cols: p.cols,
            },
        )
    }

    /// Single-level 2-D synthesis.
    pub fn inverse_level(&self, approx: &Plane, details: &DetailBands) -> Plane {
        let rows = details.input_rows;
        let row_lo = self
            .synthesize_rows(&approx.transpose(), &details.lh.transpose(), rows)
            .transpose();
        let row_hi = self
            .synthesize_rows(&details.hl.transpose(), &details.hh.transpose(), rows)
            .transpose();
        self.synthesize_rows(&row_lo, &row_hi, details.input_cols)
    }

    pub fn forward(&self, p: &Plane, levels: usize) -> Decomposition {
        let mut approx = p.clone();
        let mut details = Vec::with_capacity(levels);
        for _ in 0..levels {
            let (next, bands) = self.forward_level(&approx);
            details.push(bands);
            approx = next;
        }
        Decomposition { approx, details }
    }

    pub fn inverse(&self, dec: &Decomposition) -> Plane {
        dec.details
            .iter()
            .rev()
            .fold(dec.approx.clone(), |approx, bands| self.inverse_level(&approx, bands))
    }
}
