//! Inverse-learning digital pre-distortion.
//!
//! A pre-distorter is trained by swapping the roles of the recorded PA input
//! and output: the output, scaled by the least-squares complex gain G0, is
//! used as the regression input, and the original drive is the target. The
//! fitted model, applied before the PA, linearizes the cascade so that the
//! output tracks `u / G0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::npmodel::{fit_with_options, FitOptions, NonParametricModel};
use crate::signal::ComplexSignal;

/// A trained pre-distorter: the inverse model plus the gain normalization it
/// was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct DpdModel {
    inner: NonParametricModel,
    gain_normalization: Complex64,
}

impl DpdModel {
    pub fn inner(&self) -> &NonParametricModel {
        &self.inner
    }

    /// The complex gain G0 applied to the PA output before inverse fitting;
    /// `u / G0` is the cascade's linearization target.
    pub fn gain_normalization(&self) -> Complex64 {
        self.gain_normalization
    }

    /// Serializes as a versioned header plus the embedded inverse model.
    pub fn to_text(&self) -> String {
        format!(
            "kernelpa-dpd v1\ng0 = {:?},{:?}\n{}",
            self.gain_normalization.re,
            self.gain_normalization.im,
            self.inner.to_text()
        )
    }

    /// Parses the format produced by [`Self::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.splitn(3, '\n');
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty pre-distorter file".into()))?;
        if first.trim() != "kernelpa-dpd v1" {
            return Err(Error::Format(
                "not a pre-distorter file (bad header)".into(),
            ));
        }
        let g0_line = lines
            .next()
            .ok_or_else(|| Error::Format("missing g0 line".into()))?;
        let value = g0_line
            .split_once('=')
            .filter(|(k, _)| k.trim() == "g0")
            .map(|(_, v)| v.trim())
            .ok_or_else(|| Error::Format("expected 'g0 = re,im'".into()))?;
        let (re_str, im_str) = value
            .split_once(',')
            .ok_or_else(|| Error::Format("g0 must be re,im".into()))?;
        let re: f64 = re_str
            .trim()
            .parse()
            .map_err(|_| Error::Format("bad g0 real part".into()))?;
        let im: f64 = im_str
            .trim()
            .parse()
            .map_err(|_| Error::Format("bad g0 imaginary part".into()))?;
        let g0 = Complex64::new(re, im);
        if g0 == Complex64::new(0.0, 0.0) || !(re.is_finite() && im.is_finite()) {
            return Err(Error::Format("g0 must be finite and nonzero".into()));
        }
        let rest = lines
            .next()
            .ok_or_else(|| Error::Format("missing embedded model".into()))?;
        Ok(Self {
            inner: NonParametricModel::from_text(rest)?,
            gain_normalization: g0,
        })
    }
}

/// Least-squares complex gain G0 minimizing `sum |u - G0 y|^2`.
fn ls_gain(u: &[Complex64], y: &[Complex64]) -> Result<Complex64> {
    let num: Complex64 = y.iter().zip(u).map(|(yn, un)| yn.conj() * un).sum();
    let den: f64 = y.iter().map(|yn| yn.norm_sqr()).sum();
    if den <= 0.0 {
        return Err(Error::InvalidParameter(
            "cannot normalize gain: output record has zero power".into(),
        ));
    }
    let g0 = num / den;
    if g0 == Complex64::new(0.0, 0.0) {
        return Err(Error::Estimation(
            "records are orthogonal; linear gain is zero".into(),
        ));
    }
    Ok(g0)
}

/// Trains a pre-distorter from an aligned drive/output record pair with
/// default fit options.
pub fn dpd_train(
    u: &ComplexSignal,
    y: &ComplexSignal,
    m_depth: usize,
    p_max: usize,
    grid_points: usize,
    aperture_fraction: f64,
) -> Result<DpdModel> {
    dpd_train_with_options(
        u,
        y,
        m_depth,
        p_max,
        grid_points,
        aperture_fraction,
        &FitOptions::default(),
    )
}

/// Trains a pre-distorter: scales the output by the least-squares gain G0,
/// then fits the model pipeline with input `G0 y` and target `u`.
pub fn dpd_train_with_options(
    u: &ComplexSignal,
    y: &ComplexSignal,
    m_depth: usize,
    p_max: usize,
    grid_points: usize,
    aperture_fraction: f64,
    options: &FitOptions,
) -> Result<DpdModel> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "drive has {} samples, output {}",
            u.len(),
            y.len()
        )));
    }
    let g0 = ls_gain(u.samples(), y.samples())?;
    let scaled = y.with_samples(
        y.samples().iter().map(|v| v * g0).collect(),
        format!("g0-normalized({})", y.label()),
    )?;
    let inner = fit_with_options(
        &scaled,
        u,
        m_depth,
        p_max,
        grid_points,
        aperture_fraction,
        options,
    )?;
    Ok(DpdModel {
        inner,
        gain_normalization: g0,
    })
}

/// Applies the pre-distorter: the returned drive signal, fed to the PA,
/// produces an output tracking `u / G0`. One output sample per input sample
/// from index `m_depth` on.
pub fn dpd_apply(d: &DpdModel, u: &ComplexSignal) -> Result<ComplexSignal> {
    let out = d.inner.predict(u)?;
    out.with_samples(out.samples().to_vec(), format!("dpd({})", u.label()))
}

/// Maximum relative deviation from identity of the composed carrier
/// amplitude maps, sampled at `points` amplitudes over the central `fraction`
/// of the forward model's drive-amplitude support.
///
/// The forward model's carrier function maps drive amplitude to output
/// amplitude; scaling by |G0| and passing through the pre-distorter's carrier
/// function should return the original drive amplitude when the inverse
/// model is accurate.
pub fn carrier_composition_error(
    forward: &NonParametricModel,
    dpd: &DpdModel,
    fraction: f64,
    points: usize,
) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    let est_f = forward.entries()[0]
        .estimate()
        .ok_or_else(|| Error::Degeneracy("forward carrier function missing".into()))?;
    let est_d = dpd.inner.entries()[0]
        .estimate()
        .ok_or_else(|| Error::Degeneracy("pre-distorter carrier function missing".into()))?;
    let n_f = forward.norms()[0];
    let n_d = dpd.inner.norms()[0];
    let g0_mag = dpd.gain_normalization.norm();

    // Forward support in drive-amplitude units.
    let (lo, hi) = est_f.support();
    let (lo, hi) = (lo * n_f, hi * n_f);
    let span = hi - lo;
    let margin = (1.0 - fraction) / 2.0;
    let start = lo + margin * span;
    let stop = hi - margin * span;

    let mut worst = 0.0f64;
    for i in 0..points {
        let a = start + (stop - start) * i as f64 / (points - 1) as f64;
        if a <= 0.0 {
            continue;
        }
        let out_amp = est_f.evaluate(a / n_f)?.norm();
        let normalized = g0_mag * out_amp;
        let back = est_d.evaluate(normalized / n_d)?.norm();
        worst = worst.max((back - a).abs() / a);
    }
    Ok(worst)
}

/// Phase relation between the forward and pre-distorter memory-tap functions.
///
/// For each linear memory lag, evaluates both functions at matching relative
/// positions of their supports and, at points where both magnitudes exceed
/// 10% of their per-function maxima, records the absolute deviation of the
/// phase difference from 180 degrees. Returns `(lag, max deviation in
/// degrees)` per memory lag.
pub fn memory_phase_agreement(
    forward: &NonParametricModel,
    dpd: &DpdModel,
    points: usize,
) -> Result<Vec<(usize, f64)>> {
    if points < 2 {
        return Err(Error::InvalidParameter("need at least 2 points".into()));
    }
    if forward.m_depth() != dpd.inner.m_depth() {
        return Err(Error::InvalidParameter(format!(
            "memory depths differ: forward {} vs pre-distorter {}",
            forward.m_depth(),
            dpd.inner.m_depth()
        )));
    }
    let mut out = Vec::new();
    for lag in 1..=forward.m_depth() {
        let est_f = match forward.entries()[lag].estimate() {
            Some(e) => e,
            None => continue,
        };
        let est_d = match dpd.inner.entries()[lag].estimate() {
            Some(e) => e,
            None => continue,
        };
        let max_f = est_f
            .values()
            .iter()
            .zip(est_f.defined())
            .filter(|(_, d)| **d)
            .map(|(v, _)| v.norm())
            .fold(0.0f64, f64::max);
        let max_d = est_d
            .values()
            .iter()
            .zip(est_d.defined())
            .filter(|(_, d)| **d)
            .map(|(v, _)| v.norm())
            .fold(0.0f64, f64::max);
        let (lo_f, hi_f) = est_f.support();
        let (lo_d, hi_d) = est_d.support();
        let mut worst = 0.0f64;
        for i in 0..points {
            let t = i as f64 / (points - 1) as f64;
            let vf = est_f.evaluate(lo_f + t * (hi_f - lo_f))?;
            let vd = est_d.evaluate(lo_d + t * (hi_d - lo_d))?;
            if vf.norm() <= 0.1 * max_f || vd.norm() <= 0.1 * max_d {
                continue;
            }
            let diff = (vd / vf).arg().to_degrees().abs(); // in [0, 180]
            worst = worst.max(180.0 - diff);
        }
        out.push((lag, worst));
    }
    Ok(out)
}
