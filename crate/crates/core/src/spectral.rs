use rustfft::num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

/// In-place 2-D DFT of a row-major `rows x cols` array. The inverse is
/// unnormalized.
pub(crate) fn fft2(data: &mut [Complex64], rows: usize, cols: usize, direction: FftDirection) {
    debug_assert_eq!(data.len(), rows * cols);
    let mut planner = FftPlanner::new();
    planner.plan_fft(cols, direction).process(data);
    let mut t = transpose(data, rows, cols);
    planner.plan_fft(rows, direction).process(&mut t);
    data.copy_from_slice(&transpose(&t, cols, rows));
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

/// Signed frequency of DFT bin `k` out of `n`, in cycles per sample.
pub(crate) fn bin_frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k <= n_f / 2.0 {
        k / n_f
    } else {
        (k - n_f) / n_f
    }
}
