//! Thin wrappers over rustfft used by signal synthesis and spectral metrics.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place unnormalized forward DFT.
pub(crate) fn forward(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// In-place inverse DFT normalized by 1/N so that `inverse(forward(x)) == x`
/// up to rounding.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    if buf.len() < 2 {
        return;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Frequency of DFT bin `k` (0-based, pre-shift layout) for an `n`-point
/// transform at sample rate `fs`: non-negative frequencies first, then the
/// negative half.
pub(crate) fn bin_freq_hz(k: usize, n: usize, fs: f64) -> f64 {
    let half = n.div_ceil(2); // bins [0, half) are non-negative
    if k < half {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Ideal (brick-wall) low-pass: zero every DFT bin with |f| > bandwidth/2,
/// keeping band edges. Operates in place in the time domain.
pub(crate) fn band_limit(samples: &mut [Complex64], sample_rate_hz: f64, bandwidth_hz: f64) {
    let n = samples.len();
    if n < 2 {
        return;
    }
    forward(samples);
    let half_bw = bandwidth_hz / 2.0;
    for (k, v) in samples.iter_mut().enumerate() {
        if bin_freq_hz(k, n, sample_rate_hz).abs() > half_bw {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    inverse(samples);
}
