//! Triangular-kernel smoothing of a complex function of a real amplitude,
//! on a uniform grid with linear-interpolation evaluation.
//!
//! Given scattered observations (x_n, z_n) with nonnegative amplitudes x_n,
//! the estimator places T grid points across the observed amplitude span and
//! computes each grid value as a kernel-weighted average of the z_n whose
//! amplitude falls within the aperture around that grid point. Grid points
//! that collect no kernel mass stay undefined (flagged, not dropped), so
//! grids remain aligned across bases fitted on the same record.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Triangular kernel: `1 - |x|` for `|x| <= 1`, zero outside (and zero for
/// non-finite input, making the function total).
pub fn triangular_kernel(x: f64) -> f64 {
    if !x.is_finite() {
        return 0.0;
    }
    let a = x.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// A smoothed complex amplitude function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFunctionEstimate {
    grid: Vec<f64>,
    values: Vec<Complex64>,
    defined: Vec<bool>,
    weight_mass: Vec<f64>,
    aperture: f64,
    aperture_fraction: f64,
    support: (f64, f64),
    // Flattened defined points, cached for fast interpolation.
    defined_xs: Vec<f64>,
    defined_values: Vec<Complex64>,
}

impl KernelFunctionEstimate {
    /// Rebuilds an estimate from stored parts (deserialization), revalidating
    /// invariants.
    pub(crate) fn from_parts(
        grid: Vec<f64>,
        values: Vec<Complex64>,
        defined: Vec<bool>,
        weight_mass: Vec<f64>,
        aperture: f64,
        aperture_fraction: f64,
        support: (f64, f64),
    ) -> Result<Self> {
        let t = grid.len();
        if t < 2 {
            return Err(Error::Format("grid needs at least 2 points".into()));
        }
        if values.len() != t || defined.len() != t || weight_mass.len() != t {
            return Err(Error::Format("estimate arrays differ in length".into()));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("grid must be strictly ascending".into()));
        }
        if !(support.0.is_finite() && support.1.is_finite() && support.0 < support.1) {
            return Err(Error::Format("support interval is invalid".into()));
        }
        if !(aperture.is_finite() && aperture > 0.0) || !(aperture_fraction > 0.0) {
            return Err(Error::Format("aperture must be positive".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if defined[i] && !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Format(format!("defined value {i} is not finite")));
            }
        }
        if !defined.iter().any(|d| *d) {
            return Err(Error::Format("estimate has no defined grid points".into()));
        }
        let mut est = Self {
            grid,
            values,
            defined,
            weight_mass,
            aperture,
            aperture_fraction,
            support,
            defined_xs: Vec::new(),
            defined_values: Vec::new(),
        };
        est.rebuild_cache();
        Ok(est)
    }

    fn rebuild_cache(&mut self) {
        self.defined_xs.clear();
        self.defined_values.clear();
        for i in 0..self.grid.len() {
            if self.defined[i] {
                self.defined_xs.push(self.grid[i]);
                self.defined_values.push(self.values[i]);
            }
        }
    }

    /// Grid amplitudes (strictly ascending, spanning the support).
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Grid values; meaningful only where [`Self::defined`] is true.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }

    /// Total kernel weight collected at each grid point.
    pub fn weight_mass(&self) -> &[f64] {
        &self.weight_mass
    }

    /// Absolute aperture (amplitude units).
    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    /// Aperture as a fraction of the amplitude span.
    pub fn aperture_fraction(&self) -> f64 {
        self.aperture_fraction
    }

    /// Observed amplitude support `[min, max]`.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn defined_count(&self) -> usize {
        self.defined_xs.len()
    }

    /// Evaluates the smoothed function at a query amplitude: linear
    /// interpolation between the two nearest defined grid points, clamping to
    /// the nearest defined value outside their range.
    pub fn evaluate(&self, x_query: f64) -> Result<Complex64> {
        if !x_query.is_finite() || x_query < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "query amplitude must be finite and nonnegative, got {x_query}"
            )));
        }
        Ok(self.evaluate_unchecked(x_query))
    }

    /// Interpolation core without the argument check; used on hot paths where
    /// amplitudes are magnitudes by construction.
    pub(crate) fn evaluate_unchecked(&self, x_query: f64) -> Complex64 {
        let xs = &self.defined_xs;
        let vs = &self.defined_values;
        debug_assert!(!xs.is_empty());
        if x_query <= xs[0] {
            return vs[0];
        }
        let last = xs.len() - 1;
        if x_query >= xs[last] {
            return vs[last];
        }
        // First defined point strictly greater than the query.
        let hi = xs.partition_point(|x| *x <= x_query);
        let lo = hi - 1;
        let t = (x_query - xs[lo]) / (xs[hi] - xs[lo]);
        vs[lo] * (1.0 - t) + vs[hi] * t
    }
}

/// Estimates a complex function of amplitude by triangular-kernel averaging
/// on a `t_grid`-point uniform grid over the observed amplitude span, with
/// absolute aperture `aperture_fraction * span`.
///
/// Samples are accumulated in index order (each sample scatters onto every
/// grid point within one aperture), which fixes the floating-point reduction
/// order and makes the estimate deterministic.
pub fn estimate_function(
    x: &[f64],
    z: &[Complex64],
    t_grid: usize,
    aperture_fraction: f64,
) -> Result<KernelFunctionEstimate> {
    if x.len() != z.len() {
        return Err(Error::LengthMismatch(format!(
            "estimate: {} amplitudes vs {} targets",
            x.len(),
            z.len()
        )));
    }
    if t_grid < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 points, got {t_grid}"
        )));
    }
    if x.len() < t_grid {
        return Err(Error::InvalidParameter(format!(
            "need at least {t_grid} samples, got {}",
            x.len()
        )));
    }
    if !(aperture_fraction > 0.0 && aperture_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "aperture fraction must be in (0, 1), got {aperture_fraction}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &xi in x {
        if !xi.is_finite() || xi < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "amplitudes must be finite and nonnegative, got {xi}"
            )));
        }
        lo = lo.min(xi);
        hi = hi.max(xi);
    }
    let span = hi - lo;
    if !(span > 0.0) {
        return Err(Error::Estimation(
            "amplitude span is zero; cannot place a grid".into(),
        ));
    }

    let t = t_grid;
    let step = span / (t as f64 - 1.0);
    let grid: Vec<f64> = (0..t).map(|i| lo + step * i as f64).collect();
    let aperture = aperture_fraction * span;

    let mut num = vec![Complex64::new(0.0, 0.0); t];
    let mut den = vec![0.0f64; t];
    for (&xn, &zn) in x.iter().zip(z) {
        // Grid indices within one aperture of this sample.
        let i_lo = ((xn - aperture - lo) / step).ceil().max(0.0) as usize;
        let i_hi_f = ((xn + aperture - lo) / step).floor();
        if i_hi_f < 0.0 {
            continue;
        }
        let i_hi = (i_hi_f as usize).min(t - 1);
        for i in i_lo..=i_hi {
            let w = triangular_kernel((grid[i] - xn) / aperture);
            if w > 0.0 {
                num[i] += zn * w;
                den[i] += w;
            }
        }
    }

    let mut values = vec![Complex64::new(0.0, 0.0); t];
    let mut defined = vec![false; t];
    for i in 0..t {
        if den[i] > 0.0 {
            values[i] = num[i] / den[i];
            defined[i] = true;
        }
    }
    if !defined.iter().any(|d| *d) {
        return Err(Error::Estimation(
            "no grid point collected kernel mass".into(),
        ));
    }

    KernelFunctionEstimate::from_parts(
        grid,
        values,
        defined,
        den,
        aperture,
        aperture_fraction,
        (lo, hi),
    )
}
