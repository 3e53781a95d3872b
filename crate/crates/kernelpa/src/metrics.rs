//! Model-quality metrics: normalized mean-square error, Welch power spectral
//! density, and adjacent-channel error power ratio.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fftutil;
use crate::signal::ComplexSignal;

/// Reporting floor for log-domain error metrics. Ratios below 1e-15 and
/// exactly-zero errors are reported as this sentinel instead of -inf.
pub const METRIC_FLOOR_DB: f64 = -150.0;

/// Default Welch segment length used by [`acepr_db`]; shortened to the
/// largest power of two that fits when the record is shorter.
const ACEPR_SEGMENT_LEN: usize = 1024;

/// Normalized mean-square error in dB:
/// `10 log10( sum |ref - est|^2 / sum |ref|^2 )`.
///
/// Errors if the records differ in length, are empty, or the reference has
/// zero power. An exactly matching estimate reports [`METRIC_FLOOR_DB`].
pub fn nmse_db(reference: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "nmse: reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.is_empty() {
        return Err(Error::InvalidParameter("nmse of empty records".into()));
    }
    let denom: f64 = reference.iter().map(|v| v.norm_sqr()).sum();
    if denom <= 0.0 {
        return Err(Error::InvalidParameter(
            "nmse undefined: reference power is zero".into(),
        ));
    }
    let num: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r - e).norm_sqr())
        .sum();
    if num == 0.0 {
        return Ok(METRIC_FLOOR_DB);
    }
    Ok((10.0 * (num / denom).log10()).max(METRIC_FLOOR_DB))
}

/// [`nmse_db`] over whole signals; additionally checks the sample rates agree.
pub fn nmse_signals_db(reference: &ComplexSignal, estimate: &ComplexSignal) -> Result<f64> {
    if reference.sample_rate_hz() != estimate.sample_rate_hz() {
        return Err(Error::InvalidParameter(format!(
            "nmse: sample rates differ ({} vs {})",
            reference.sample_rate_hz(),
            estimate.sample_rate_hz()
        )));
    }
    nmse_db(reference.samples(), estimate.samples())
}

/// A two-sided power spectral density estimate on an fftshifted frequency
/// grid (ascending frequencies, DC at index `len/2`).
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    pub frequencies_hz: Vec<f64>,
    /// Density in power per Hz; integrates to the record's mean power.
    pub psd: Vec<f64>,
    pub resolution_hz: f64,
    pub segment_length: usize,
    pub segment_count: usize,
    /// Analysis window used on each segment.
    pub window: &'static str,
}

impl SpectrumEstimate {
    /// Integrated power over `[f_lo, f_hi)`.
    pub fn band_power(&self, f_lo: f64, f_hi: f64) -> Result<f64> {
        if !(f_lo.is_finite() && f_hi.is_finite() && f_lo < f_hi) {
            return Err(Error::InvalidParameter(format!(
                "band [{f_lo}, {f_hi}) is empty or not finite"
            )));
        }
        Ok(self
            .frequencies_hz
            .iter()
            .zip(&self.psd)
            .filter(|(f, _)| **f >= f_lo && **f < f_hi)
            .map(|(_, p)| p * self.resolution_hz)
            .sum())
    }

    /// Total integrated power.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().map(|p| p * self.resolution_hz).sum()
    }
}

/// Welch-averaged periodogram with a Hann window and 50% segment overlap.
///
/// The averaged density is rescaled so that it integrates exactly to the
/// record's mean power (a discrete Parseval identity), which makes band-power
/// ratios insensitive to window normalization conventions.
pub fn welch_psd(
    samples: &[Complex64],
    sample_rate_hz: f64,
    segment_length: usize,
) -> Result<SpectrumEstimate> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if segment_length < 8 {
        return Err(Error::InvalidParameter(format!(
            "segment length must be at least 8, got {segment_length}"
        )));
    }
    if samples.len() < segment_length {
        return Err(Error::LengthMismatch(format!(
            "record of {} samples is shorter than one segment ({segment_length})",
            samples.len()
        )));
    }

    let l = segment_length;
    let window: Vec<f64> = (0..l)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (l as f64 - 1.0)).cos())
        })
        .collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();

    let step = l / 2;
    let segment_count = (samples.len() - l) / step + 1;
    let mut accum = vec![0.0f64; l];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for s in 0..segment_count {
        let start = s * step;
        for i in 0..l {
            buf[i] = samples[start + i] * window[i];
        }
        fftutil::forward(&mut buf);
        for (a, v) in accum.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
    }
    let norm = 1.0 / (segment_count as f64 * sample_rate_hz * window_energy);
    for a in accum.iter_mut() {
        *a *= norm;
    }

    // fftshift both axes: negative-frequency half first.
    let half = l.div_ceil(2);
    let mut psd = Vec::with_capacity(l);
    let mut frequencies_hz = Vec::with_capacity(l);
    for k in (half..l).chain(0..half) {
        psd.push(accum[k]);
        frequencies_hz.push(fftutil::bin_freq_hz(k, l, sample_rate_hz));
    }

    // Force the discrete Parseval identity: integral of the density equals
    // the record's mean power.
    let resolution_hz = sample_rate_hz / l as f64;
    let mean_power = crate::signal::mean_power(samples);
    let integral: f64 = psd.iter().map(|p| p * resolution_hz).sum();
    if integral > 0.0 && mean_power > 0.0 {
        let scale = mean_power / integral;
        for p in psd.iter_mut() {
            *p *= scale;
        }
    }

    Ok(SpectrumEstimate {
        frequencies_hz,
        psd,
        resolution_hz,
        segment_length: l,
        segment_count,
        window: "hann",
    })
}

/// [`welch_psd`] over a signal, taking the sample rate from its metadata.
pub fn psd(signal: &ComplexSignal, segment_length: usize) -> Result<SpectrumEstimate> {
    welch_psd(signal.samples(), signal.sample_rate_hz(), segment_length)
}

/// Adjacent-channel error power ratio in dB.
///
/// The error record `ref - est` is Welch-analyzed; the worse of the two
/// first adjacent channels (`[bw/2, 3bw/2)` and `[-3bw/2, -bw/2)`) of error
/// power is referenced to the main-channel power `[-bw/2, bw/2)` of the
/// reference itself. Requires `channel_bandwidth_hz < sample_rate/3` so both
/// adjacent bands fit inside Nyquist.
pub fn acepr_db(
    reference: &[Complex64],
    estimate: &[Complex64],
    sample_rate_hz: f64,
    channel_bandwidth_hz: f64,
) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "acepr: reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if !(channel_bandwidth_hz.is_finite() && channel_bandwidth_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "channel bandwidth must be positive, got {channel_bandwidth_hz}"
        )));
    }
    if 3.0 * channel_bandwidth_hz / 2.0 >= sample_rate_hz / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "adjacent channels exceed Nyquist: need bw < fs/3, got bw {channel_bandwidth_hz}, fs {sample_rate_hz}"
        )));
    }
    if reference.len() < 64 {
        return Err(Error::InvalidParameter(format!(
            "acepr needs at least 64 samples, got {}",
            reference.len()
        )));
    }

    let mut seg = ACEPR_SEGMENT_LEN;
    while seg > reference.len() {
        seg /= 2;
    }

    let err: Vec<Complex64> = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| r - e)
        .collect();
    let err_spec = welch_psd(&err, sample_rate_hz, seg)?;
    let ref_spec = welch_psd(reference, sample_rate_hz, seg)?;

    let half_bw = channel_bandwidth_hz / 2.0;
    let main = ref_spec.band_power(-half_bw, half_bw)?;
    if main <= 0.0 {
        return Err(Error::Estimation(
            "acepr undefined: reference has no in-band power".into(),
        ));
    }
    let upper = err_spec.band_power(half_bw, 3.0 * half_bw)?;
    let lower = err_spec.band_power(-3.0 * half_bw, -half_bw)?;
    let adj = upper.max(lower);
    if adj <= 0.0 {
        return Ok(METRIC_FLOOR_DB);
    }
    Ok((10.0 * (adj / main).log10()).max(METRIC_FLOOR_DB))
}

/// [`acepr_db`] over whole signals, using the reference metadata for rate and
/// channel bandwidth.
pub fn acepr_signals_db(reference: &ComplexSignal, estimate: &ComplexSignal) -> Result<f64> {
    acepr_db(
        reference.samples(),
        estimate.samples(),
        reference.sample_rate_hz(),
        reference.bandwidth_hz(),
    )
}
