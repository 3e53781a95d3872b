//! Compact parametric models extracted from the smoothed basis functions:
//! odd-power polynomial fits per function, exact substitution back to the
//! original (non-orthogonal) input domain, direct least-squares
//! identification, and deployment FLOP accounting.
//!
//! A parametric term is `coeff * x(n-lag) |x(n-lag)|^(2(p-1))` where `x` is
//! either the orthogonalized column variable (orthogonal domain) or the raw
//! input (original domain).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::KernelFunctionEstimate;
use crate::linalg::least_squares;
use crate::metrics::{nmse_db, METRIC_FLOOR_DB};
use crate::npmodel::NonParametricModel;
use crate::regressor::{apply_projection_table, build_regressor_set};
use crate::signal::ComplexSignal;

/// Which variable the terms apply to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Terms in the orthogonalized column variables; lag k refers to the
    /// unit-subset basis column for lag k (the first M+1 columns).
    Orthogonal,
    /// Terms directly in the delayed input signal.
    Original,
}

/// One polynomial term `coefficient * x(n-lag) |x(n-lag)|^(2(exponent-1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricTerm {
    pub lag: usize,
    /// Odd-order index p >= 1; p = 1 is a pure delayed linear term.
    pub exponent: usize,
    pub coefficient: Complex64,
}

/// A compact polynomial model in one of the two domains.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricModel {
    domain: Domain,
    terms: Vec<ParametricTerm>,
    training_nmse_db: Option<f64>,
}

impl ParametricModel {
    pub fn new(domain: Domain, terms: Vec<ParametricTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter(
                "parametric model needs at least one term".into(),
            ));
        }
        for t in &terms {
            if t.exponent == 0 {
                return Err(Error::InvalidParameter(
                    "term exponent index must be >= 1".into(),
                ));
            }
            if !(t.coefficient.re.is_finite() && t.coefficient.im.is_finite()) {
                return Err(Error::InvalidParameter("term coefficient not finite".into()));
            }
        }
        Ok(Self {
            domain,
            terms,
            training_nmse_db: None,
        })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn terms(&self) -> &[ParametricTerm] {
        &self.terms
    }

    /// Training NMSE recorded by [`identify_least_squares`], if any.
    pub fn training_nmse_db(&self) -> Option<f64> {
        self.training_nmse_db
    }

    pub fn max_lag(&self) -> usize {
        self.terms.iter().map(|t| t.lag).max().unwrap_or(0)
    }

    /// Evaluates an original-domain model on a record. Output sample i
    /// corresponds to input sample `i + max_lag` (leading samples lack delay
    /// history).
    pub fn predict(&self, u: &ComplexSignal) -> Result<ComplexSignal> {
        if self.domain != Domain::Original {
            return Err(Error::InvalidParameter(
                "direct prediction needs an original-domain model; convert first".into(),
            ));
        }
        let lag_max = self.max_lag();
        if u.len() <= lag_max {
            return Err(Error::InvalidParameter(format!(
                "record of {} samples is too short for lag {lag_max}",
                u.len()
            )));
        }
        let us = u.samples();
        let out: Vec<Complex64> = (lag_max..us.len())
            .map(|n| {
                self.terms
                    .iter()
                    .map(|t| t.coefficient * term_value(us[n - t.lag], t.exponent))
                    .sum()
            })
            .collect();
        u.with_samples(out, format!("parametric({})", u.label()))
    }

    /// Evaluates an orthogonal-domain model by reconstructing the
    /// orthogonalized columns with the non-parametric model's frozen
    /// projection table. Output is trimmed by the model's memory depth.
    pub fn predict_in_orthogonal_domain(
        &self,
        source: &NonParametricModel,
        u: &ComplexSignal,
    ) -> Result<ComplexSignal> {
        if self.domain != Domain::Orthogonal {
            return Err(Error::InvalidParameter(
                "model is not in the orthogonal domain".into(),
            ));
        }
        if self.max_lag() > source.m_depth() {
            return Err(Error::InvalidParameter(format!(
                "term lag {} exceeds the source model memory depth {}",
                self.max_lag(),
                source.m_depth()
            )));
        }
        let matrix = build_regressor_set(u, source.m_depth(), source.p_max())?;
        let ortho = apply_projection_table(
            &matrix,
            source.projections(),
            source.norms(),
            source.degenerate_flags(),
        )?;
        let n = matrix.n_rows();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for t in &self.terms {
            // Unit-subset columns come first: column index == lag.
            let col = &ortho[t.lag];
            for (o, v) in out.iter_mut().zip(col) {
                *o += t.coefficient * term_value(*v, t.exponent);
            }
        }
        u.with_samples(out, format!("parametric({})", u.label()))
    }

    /// Deployment cost per output sample in FLOPs, under the fixed counting
    /// rules (complex multiply 6, complex add 2, real multiply/add 1,
    /// squared magnitude 3, real-by-complex scale 2). The squared magnitude
    /// of each distinct lag is computed once and shared; each nonlinear term
    /// raises it with a chain of real multiplies.
    pub fn flops_per_sample(&self) -> usize {
        let mut flops = 0usize;
        let mut lags_with_powers: Vec<usize> = self
            .terms
            .iter()
            .filter(|t| t.exponent >= 2)
            .map(|t| t.lag)
            .collect();
        lags_with_powers.sort_unstable();
        lags_with_powers.dedup();
        flops += 3 * lags_with_powers.len();
        for t in &self.terms {
            flops += match t.exponent {
                1 => 6,
                p => (p - 2) + 2 + 6,
            };
        }
        flops + 2 * (self.terms.len() - 1)
    }

    /// Versioned text serialization; value-exact round trip.
    pub fn to_text(&self) -> String {
        let mut out = String::from("kernelpa-parametric v1\n");
        out.push_str(&format!(
            "domain = {}\n",
            match self.domain {
                Domain::Orthogonal => "orthogonal",
                Domain::Original => "original",
            }
        ));
        if let Some(nmse) = self.training_nmse_db {
            out.push_str(&format!("nmse_db = {nmse:?}\n"));
        }
        for t in &self.terms {
            out.push_str(&format!(
                "term = {},{},{:?},{:?}\n",
                t.lag, t.exponent, t.coefficient.re, t.coefficient.im
            ));
        }
        out.push_str("end\n");
        out
    }

    /// Parses the text format produced by [`Self::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("empty parametric model file".into()))?;
        if first.trim() != "kernelpa-parametric v1" {
            return Err(Error::Format(
                "not a parametric model file (bad header)".into(),
            ));
        }
        let mut domain: Option<Domain> = None;
        let mut nmse: Option<f64> = None;
        let mut terms: Vec<ParametricTerm> = Vec::new();
        let mut saw_end = false;
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                saw_end = true;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::format_at(line_no, "expected key = value"))?;
            match key.trim() {
                "domain" => {
                    domain = Some(match value.trim() {
                        "orthogonal" => Domain::Orthogonal,
                        "original" => Domain::Original,
                        other => {
                            return Err(Error::format_at(
                                line_no,
                                format!("unknown domain '{other}'"),
                            ))
                        }
                    })
                }
                "nmse_db" => {
                    nmse = Some(value.trim().parse().map_err(|_| {
                        Error::format_at(line_no, format!("bad nmse_db '{}'", value.trim()))
                    })?)
                }
                "term" => {
                    let fields: Vec<&str> = value.trim().split(',').collect();
                    if fields.len() != 4 {
                        return Err(Error::format_at(
                            line_no,
                            "term needs lag,exponent,re,im",
                        ));
                    }
                    let lag: usize = fields[0]
                        .trim()
                        .parse()
                        .map_err(|_| Error::format_at(line_no, "bad term lag"))?;
                    let exponent: usize = fields[1]
                        .trim()
                        .parse()
                        .map_err(|_| Error::format_at(line_no, "bad term exponent"))?;
                    let re: f64 = fields[2]
                        .trim()
                        .parse()
                        .map_err(|_| Error::format_at(line_no, "bad term re"))?;
                    let im: f64 = fields[3]
                        .trim()
                        .parse()
                        .map_err(|_| Error::format_at(line_no, "bad term im"))?;
                    terms.push(ParametricTerm {
                        lag,
                        exponent,
                        coefficient: Complex64::new(re, im),
                    });
                }
                other => {
                    return Err(Error::format_at(line_no, format!("unknown key '{other}'")))
                }
            }
        }
        if !saw_end {
            return Err(Error::Format(
                "parametric model file is truncated (missing 'end')".into(),
            ));
        }
        let domain = domain.ok_or_else(|| Error::Format("missing domain".into()))?;
        let mut model = Self::new(domain, terms)?;
        model.training_nmse_db = nmse;
        Ok(model)
    }
}

#[inline]
fn term_value(x: Complex64, exponent: usize) -> Complex64 {
    if exponent == 1 {
        x
    } else {
        x * x.norm_sqr().powi(exponent as i32 - 1)
    }
}

/// Weighted least-squares fit of odd amplitude powers to a smoothed function:
/// `g(x_i) ~ sum_p c_p x_i^(2p-1)` for p = 1..=(order+1)/2, weighted by the
/// per-grid-point sample mass. Returns the coefficients and the weighted fit
/// residual in dB.
///
/// `order` is the highest odd power and must be odd; the estimate needs at
/// least `order + 1` defined grid points.
pub fn fit_polynomial_to_kernel(
    f: &KernelFunctionEstimate,
    order: usize,
) -> Result<(Vec<Complex64>, f64)> {
    if order == 0 || order % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "polynomial order must be odd and >= 1, got {order}"
        )));
    }
    let n_coef = order.div_ceil(2);
    let mut xs = Vec::new();
    let mut gs = Vec::new();
    let mut ws = Vec::new();
    for i in 0..f.grid().len() {
        if f.defined()[i] {
            xs.push(f.grid()[i]);
            gs.push(f.values()[i]);
            ws.push(f.weight_mass()[i]);
        }
    }
    if xs.len() < order + 1 {
        return Err(Error::InvalidParameter(format!(
            "need at least {} defined grid points for order {order}, have {}",
            order + 1,
            xs.len()
        )));
    }

    let sqrt_w: Vec<f64> = ws.iter().map(|w| w.sqrt()).collect();
    let columns: Vec<Vec<Complex64>> = (0..n_coef)
        .map(|p| {
            xs.iter()
                .zip(&sqrt_w)
                .map(|(x, sw)| Complex64::new(x.powi(2 * p as i32 + 1) * sw, 0.0))
                .collect()
        })
        .collect();
    let target: Vec<Complex64> = gs.iter().zip(&sqrt_w).map(|(g, sw)| g * sw).collect();
    let coeffs = least_squares(&columns, &target).map_err(|_| {
        Error::Degeneracy(format!(
            "rank-deficient polynomial design (order {order} on {} points)",
            xs.len()
        ))
    })?;

    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..xs.len() {
        let fit: Complex64 = (0..n_coef)
            .map(|p| coeffs[p] * xs[i].powi(2 * p as i32 + 1))
            .sum();
        num += ws[i] * (gs[i] - fit).norm_sqr();
        den += ws[i] * gs[i].norm_sqr();
    }
    let residual_db = if den <= 0.0 || num == 0.0 {
        METRIC_FLOOR_DB
    } else {
        (10.0 * (num / den).log10()).max(METRIC_FLOOR_DB)
    };
    Ok((coeffs, residual_db))
}

/// Extracts an orthogonal-domain parametric model from a fitted
/// non-parametric model: the carrier function (lag-0 column) is fitted with
/// odd powers up to `carrier_order`, and each active linear memory column is
/// fitted with a single linear coefficient.
pub fn extract(model: &NonParametricModel, carrier_order: usize) -> Result<ParametricModel> {
    let mut terms = Vec::new();
    for lag in 0..=model.m_depth() {
        let entry = &model.entries()[lag];
        debug_assert_eq!(entry.descriptor().subset(), &[lag]);
        if !entry.active() {
            continue;
        }
        let est = entry.estimate().ok_or_else(|| {
            Error::Degeneracy(format!("lag-{lag} column is degenerate; nothing to extract"))
        })?;
        if lag == 0 {
            let (coeffs, _) = fit_polynomial_to_kernel(est, carrier_order)?;
            for (p, c) in coeffs.into_iter().enumerate() {
                terms.push(ParametricTerm {
                    lag: 0,
                    exponent: p + 1,
                    coefficient: c,
                });
            }
        } else {
            let (coeffs, _) = fit_polynomial_to_kernel(est, 1)?;
            terms.push(ParametricTerm {
                lag,
                exponent: 1,
                coefficient: coeffs[0],
            });
        }
    }
    ParametricModel::new(Domain::Orthogonal, terms)
}

/// Substitutes the orthogonalized variables of an orthogonal-domain model by
/// their exact linear combinations of delayed inputs, yielding an
/// original-domain model.
///
/// Linear terms substitute through the full triangular recurrence. Nonlinear
/// terms are supported only on lag 0, whose column is an exact scalar
/// multiple of the input; a nonlinear term on a deeper lag is rejected.
pub fn to_original_domain(
    pm: &ParametricModel,
    source: &NonParametricModel,
) -> Result<ParametricModel> {
    if pm.domain() != Domain::Orthogonal {
        return Err(Error::InvalidParameter(
            "model is already in the original domain".into(),
        ));
    }
    let m_depth = source.m_depth();
    if pm.max_lag() > m_depth {
        return Err(Error::InvalidParameter(format!(
            "term lag {} exceeds the source model memory depth {m_depth}",
            pm.max_lag()
        )));
    }
    // representation[k][m]: coefficient of u(n-m) in the k-th orthogonalized
    // unit-subset column. The p=1 block comes first in the basis order, so
    // the recurrence closes over pure delays.
    let mut representation: Vec<Vec<Complex64>> = Vec::with_capacity(m_depth + 1);
    for k in 0..=m_depth {
        if source.degenerate_flags()[k] {
            return Err(Error::Degeneracy(format!(
                "lag-{k} column is degenerate; cannot substitute"
            )));
        }
        let mut row = vec![Complex64::new(0.0, 0.0); m_depth + 1];
        row[k] = Complex64::new(1.0, 0.0);
        for l in 0..k {
            let c = source.projections()[k][l];
            for m in 0..=m_depth {
                row[m] -= c * representation[l][m];
            }
        }
        let inv_norm = 1.0 / source.norms()[k];
        for v in row.iter_mut() {
            *v *= inv_norm;
        }
        representation.push(row);
    }

    let mut collected: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    for t in &pm.terms {
        if t.exponent == 1 {
            for m in 0..=m_depth {
                let c = t.coefficient * representation[t.lag][m];
                if c != Complex64::new(0.0, 0.0) {
                    *collected
                        .entry((m, 1))
                        .or_insert(Complex64::new(0.0, 0.0)) += c;
                }
            }
        } else {
            if t.lag != 0 {
                return Err(Error::InvalidParameter(format!(
                    "unsupported substitution: nonlinear term (p = {}) on delayed column {}",
                    t.exponent, t.lag
                )));
            }
            // Column 0 is u(n) / norm_0 exactly.
            let scale = representation[0][0];
            debug_assert!(scale.im == 0.0);
            let factor = scale.re.powi(2 * t.exponent as i32 - 1);
            *collected
                .entry((0, t.exponent))
                .or_insert(Complex64::new(0.0, 0.0)) += t.coefficient * factor;
        }
    }

    let terms: Vec<ParametricTerm> = collected
        .into_iter()
        .map(|((lag, exponent), coefficient)| ParametricTerm {
            lag,
            exponent,
            coefficient,
        })
        .collect();
    ParametricModel::new(Domain::Original, terms)
}

/// Identifies the coefficients of a fixed original-domain term structure by
/// complex least squares on an aligned input/output record pair, and records
/// the training NMSE.
pub fn identify_least_squares(
    structure: &[(usize, usize)],
    u: &ComplexSignal,
    y: &ComplexSignal,
) -> Result<ParametricModel> {
    if structure.is_empty() {
        return Err(Error::InvalidParameter("empty term structure".into()));
    }
    if u.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "input has {} samples, output {}",
            u.len(),
            y.len()
        )));
    }
    if u.len() < 10 * structure.len() {
        return Err(Error::InvalidParameter(format!(
            "record of {} samples is too short for {} terms (need >= {})",
            u.len(),
            structure.len(),
            10 * structure.len()
        )));
    }
    let lag_max = structure.iter().map(|(lag, _)| *lag).max().unwrap_or(0);
    let us = u.samples();
    let columns: Vec<Vec<Complex64>> = structure
        .iter()
        .map(|&(lag, p)| {
            (lag_max..us.len())
                .map(|n| term_value(us[n - lag], p))
                .collect()
        })
        .collect();
    let target = &y.samples()[lag_max..];
    let coeffs = least_squares(&columns, target).map_err(|_| {
        Error::Degeneracy(format!(
            "rank-deficient term structure {structure:?}: columns are linearly dependent"
        ))
    })?;

    let fit: Vec<Complex64> = (0..target.len())
        .map(|i| (0..columns.len()).map(|t| coeffs[t] * columns[t][i]).sum())
        .collect();
    let nmse = nmse_db(target, &fit)?;

    let terms = structure
        .iter()
        .zip(coeffs)
        .map(|(&(lag, exponent), coefficient)| ParametricTerm {
            lag,
            exponent,
            coefficient,
        })
        .collect();
    let mut model = ParametricModel::new(Domain::Original, terms)?;
    model.training_nmse_db = Some(nmse);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::estimate_function;
    use crate::npmodel::fit;
    use crate::refpa::{default_config, reference_pa, TRANSIENT_SAMPLES};
    use crate::signal::generate;

    /// Builds a kernel estimate whose defined values are exactly g(x) at the
    /// grid points: samples sit exactly on the grid and the aperture is
    /// narrower than the grid step, so each window sees only its own point.
    fn exact_estimate(g: impl Fn(f64) -> Complex64, t: usize) -> KernelFunctionEstimate {
        let mut xs = Vec::new();
        let mut zs = Vec::new();
        for i in 0..t {
            let x = i as f64 / (t - 1) as f64;
            for _ in 0..3 {
                xs.push(x);
                zs.push(g(x));
            }
        }
        estimate_function(&xs, &zs, t, 0.2 / (t as f64 - 1.0)).unwrap()
    }

    fn refpa_pair(n: usize, seed: u64) -> (ComplexSignal, ComplexSignal) {
        let u = generate(n, 400e6, 100e6, seed).unwrap();
        let u = u
            .with_samples(u.samples().iter().map(|v| v * 0.5).collect(), u.label())
            .unwrap();
        let y = reference_pa(&u, &default_config()).unwrap();
        (u, y)
    }

    #[test]
    fn linear_function_fits_exactly_at_order_one() {
        let est = exact_estimate(|x| Complex64::new(2.0 * x, 0.0), 50);
        let (coeffs, residual) = fit_polynomial_to_kernel(&est, 1).unwrap();
        assert_eq!(coeffs.len(), 1);
        assert!((coeffs[0] - Complex64::new(2.0, 0.0)).norm() < 1e-10);
        assert!(residual <= -100.0, "residual {residual}");
    }

    #[test]
    fn cubic_function_coefficients_recovered() {
        let est = exact_estimate(|x| Complex64::new(2.0 * x - 0.5 * x * x * x, 0.0), 60);
        let (coeffs, residual) = fit_polynomial_to_kernel(&est, 3).unwrap();
        assert_eq!(coeffs.len(), 2);
        assert!((coeffs[0] - Complex64::new(2.0, 0.0)).norm() < 1e-6);
        assert!((coeffs[1] - Complex64::new(-0.5, 0.0)).norm() < 1e-6);
        assert!(residual <= -100.0);
    }

    #[test]
    fn residual_non_increasing_in_order_and_good_on_refpa_carrier() {
        let (u, y) = refpa_pair(20_000, 51);
        let model = fit(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
        let g0 = model.entries()[0].estimate().unwrap();
        let mut last = f64::INFINITY;
        for order in [1usize, 3, 5, 7] {
            let (_, residual) = fit_polynomial_to_kernel(g0, order).unwrap();
            assert!(
                residual <= last + 1e-9,
                "residual rose at order {order}: {last} -> {residual}"
            );
            last = residual;
        }
        assert!(last <= -30.0, "order-7 residual {last:.1} dB");
    }

    #[test]
    fn polynomial_fit_parameter_checks() {
        let est = exact_estimate(|x| Complex64::new(x, 0.0), 10);
        assert!(fit_polynomial_to_kernel(&est, 0).is_err());
        assert!(fit_polynomial_to_kernel(&est, 2).is_err());
        // 10 defined points cannot support order 21 (needs 22).
        assert!(fit_polynomial_to_kernel(&est, 21).is_err());
    }

    #[test]
    fn extraction_yields_six_terms_and_round_trips_predictions() {
        let (u, y) = refpa_pair(30_000, 52);
        let model = fit(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
        let ortho_pm = extract(&model, 7).unwrap();
        assert_eq!(ortho_pm.domain(), Domain::Orthogonal);
        assert_eq!(ortho_pm.terms().len(), 6); // 4 carrier powers + 2 taps

        let orig_pm = to_original_domain(&ortho_pm, &model).unwrap();
        assert_eq!(orig_pm.domain(), Domain::Original);
        assert_eq!(orig_pm.terms().len(), 6);

        let p_ortho = ortho_pm.predict_in_orthogonal_domain(&model, &u).unwrap();
        let p_orig = orig_pm.predict(&u).unwrap();
        let scale: f64 = p_ortho
            .samples()
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        let diff: f64 = p_ortho
            .samples()
            .iter()
            .zip(p_orig.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            diff / scale <= 1e-9,
            "domain conversion moved predictions by {}",
            diff / scale
        );
    }

    #[test]
    fn single_column_conversion_is_norm_scaling() {
        // M = 0: the only column is u / norm_0, so converting gamma * x |x|^2
        // must give gamma / norm_0^3 on the raw input.
        let (u, y) = refpa_pair(5_000, 53);
        let model = fit(&u, &y, 0, 1, 40, 1.0 / 40.0).unwrap();
        let gamma = Complex64::new(1.5, -0.25);
        let pm = ParametricModel::new(
            Domain::Orthogonal,
            vec![ParametricTerm {
                lag: 0,
                exponent: 2,
                coefficient: gamma,
            }],
        )
        .unwrap();
        let orig = to_original_domain(&pm, &model).unwrap();
        let expect = gamma * model.norms()[0].powi(-3);
        assert!((orig.terms()[0].coefficient - expect).norm() <= 1e-12 * expect.norm());
    }

    #[test]
    fn nonlinear_term_on_deep_lag_is_rejected() {
        let (u, y) = refpa_pair(5_000, 54);
        let model = fit(&u, &y, 2, 2, 40, 1.0 / 40.0).unwrap();
        let pm = ParametricModel::new(
            Domain::Orthogonal,
            vec![ParametricTerm {
                lag: 1,
                exponent: 2,
                coefficient: Complex64::new(1.0, 0.0),
            }],
        )
        .unwrap();
        assert!(to_original_domain(&pm, &model).is_err());
    }

    /// The canonical six-term structure: odd powers 1/3/5/7 on lag 0 plus
    /// linear taps on lags 1 and 2.
    fn six_term_structure() -> Vec<(usize, usize)> {
        vec![(0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (2, 1)]
    }

    fn six_term_truth() -> Vec<Complex64> {
        vec![
            Complex64::new(4.0, 0.5),
            Complex64::new(-0.35, -0.1),
            Complex64::new(0.03, 0.002),
            Complex64::new(-0.001, -0.0002),
            Complex64::new(0.15, -0.19),
            Complex64::new(-0.02, 0.15),
        ]
    }

    fn synth_output(u: &ComplexSignal, coeffs: &[Complex64]) -> ComplexSignal {
        let structure = six_term_structure();
        let us = u.samples();
        let out: Vec<Complex64> = (0..us.len())
            .map(|n| {
                structure
                    .iter()
                    .zip(coeffs)
                    .filter(|(&(lag, _), _)| n >= lag)
                    .map(|(&(lag, p), c)| c * term_value(us[n - lag], p))
                    .sum()
            })
            .collect();
        u.with_samples(out, "synth").unwrap()
    }

    #[test]
    fn identification_recovers_exact_model() {
        let u = generate(20_000, 400e6, 100e6, 55).unwrap();
        let y = synth_output(&u, &six_term_truth());
        let model = identify_least_squares(&six_term_structure(), &u, &y).unwrap();
        for (t, truth) in model.terms().iter().zip(six_term_truth()) {
            assert!(
                (t.coefficient - truth).norm() <= 1e-8 * truth.norm(),
                "coefficient {:?} vs {truth:?}",
                t.coefficient
            );
        }
        assert!(model.training_nmse_db().unwrap() <= -100.0);
    }

    #[test]
    fn identification_tolerates_40_db_noise() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        use rand_distr::StandardNormal;

        let u = generate(100_000, 400e6, 100e6, 56).unwrap();
        let clean = synth_output(&u, &six_term_truth());
        let p_out = clean.mean_power();
        let sigma = (p_out * 1e-4 / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let noisy = clean
            .with_samples(
                clean
                    .samples()
                    .iter()
                    .map(|v| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        v + Complex64::new(re * sigma, im * sigma)
                    })
                    .collect(),
                "noisy",
            )
            .unwrap();
        let model = identify_least_squares(&six_term_structure(), &u, &noisy).unwrap();
        for (t, truth) in model.terms().iter().zip(six_term_truth()) {
            let rel = (t.coefficient - truth).norm() / truth.norm();
            assert!(rel <= 1e-2, "coefficient error {rel:.2e} for {truth:?}");
        }
    }

    #[test]
    fn identified_structure_matches_np_model_on_in_class_device() {
        let (u, y) = refpa_pair(30_000, 57);
        let np = fit(&u, &y, 2, 2, 70, 1.0 / 70.0).unwrap();
        let np_nmse = np.training_report().total_nmse_db();

        // Skip the reference device's start-up transient for the direct fit.
        let u_t =
            ComplexSignal::new(u.samples()[TRANSIENT_SAMPLES..].to_vec(), 400e6, 100e6, "u")
                .unwrap();
        let y_t =
            ComplexSignal::new(y.samples()[TRANSIENT_SAMPLES..].to_vec(), 400e6, 100e6, "y")
                .unwrap();
        let pm = identify_least_squares(&six_term_structure(), &u_t, &y_t).unwrap();
        let pm_nmse = pm.training_nmse_db().unwrap();
        // The device is inside the six-term class, so the compact model must
        // do at least as well as the non-parametric fit (up to 1 dB).
        assert!(
            pm_nmse <= np_nmse + 1.0,
            "parametric {pm_nmse:.1} dB vs non-parametric {np_nmse:.1} dB"
        );
    }

    #[test]
    fn identification_rejects_degenerate_structure() {
        let u = generate(2_000, 100e6, 30e6, 58).unwrap();
        let y = synth_output(&u, &six_term_truth());
        // Duplicated column makes the design rank-deficient.
        let structure = vec![(0usize, 1usize), (0, 1)];
        let err = identify_least_squares(&structure, &u, &y).unwrap_err();
        assert!(matches!(err, Error::Degeneracy(_)));
        assert!(err.to_string().contains("(0, 1)"));
    }

    #[test]
    fn identification_is_locally_optimal() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        let (u, y) = refpa_pair(10_000, 59);
        let model = identify_least_squares(&six_term_structure(), &u, &y).unwrap();
        let base = model.training_nmse_db().unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let perturbed: Vec<ParametricTerm> = model
                .terms()
                .iter()
                .map(|t| {
                    let eps = Complex64::new(
                        (rng.random::<f64>() - 0.5) * 1e-3,
                        (rng.random::<f64>() - 0.5) * 1e-3,
                    );
                    ParametricTerm {
                        coefficient: t.coefficient * (Complex64::new(1.0, 0.0) + eps),
                        ..t.clone()
                    }
                })
                .collect();
            let pm = ParametricModel::new(Domain::Original, perturbed).unwrap();
            let pred = pm.predict(&u).unwrap();
            let nmse = nmse_db(&y.samples()[2..], pred.samples()).unwrap();
            assert!(nmse >= base - 1e-9, "perturbation beat LS: {nmse} < {base}");
        }
    }

    #[test]
    fn flops_anchors() {
        // One linear term: a single complex multiply.
        let single = ParametricModel::new(
            Domain::Original,
            vec![ParametricTerm {
                lag: 0,
                exponent: 1,
                coefficient: Complex64::new(1.0, 0.0),
            }],
        )
        .unwrap();
        assert_eq!(single.flops_per_sample(), 6);

        // Six-term model, hand count: shared |u(n)|^2 (3); terms 6 + 8 + 9 +
        // 10 + 6 + 6 = 45; five complex adds (10). Total 58.
        let terms = six_term_structure()
            .into_iter()
            .zip(six_term_truth())
            .map(|((lag, exponent), coefficient)| ParametricTerm {
                lag,
                exponent,
                coefficient,
            })
            .collect();
        let six = ParametricModel::new(Domain::Original, terms).unwrap();
        assert_eq!(six.flops_per_sample(), 58);

        // Monotone in term count.
        let mut more = six.terms().to_vec();
        more.push(ParametricTerm {
            lag: 1,
            exponent: 2,
            coefficient: Complex64::new(0.01, 0.0),
        });
        let seven = ParametricModel::new(Domain::Original, more).unwrap();
        assert!(seven.flops_per_sample() > six.flops_per_sample());
    }

    #[test]
    fn serialization_round_trip() {
        let (u, y) = refpa_pair(5_000, 60);
        let model = identify_least_squares(&six_term_structure(), &u, &y).unwrap();
        let text = model.to_text();
        let back = ParametricModel::from_text(&text).unwrap();
        assert_eq!(model, back);
        assert_eq!(back.to_text(), text);

        // Orthogonal-domain models round-trip too.
        let np = fit(&u, &y, 2, 2, 40, 1.0 / 40.0).unwrap();
        let ortho = extract(&np, 7).unwrap();
        assert_eq!(
            ParametricModel::from_text(&ortho.to_text()).unwrap(),
            ortho
        );
    }

    #[test]
    fn serialization_rejects_malformed_input() {
        assert!(ParametricModel::from_text("").is_err());
        assert!(ParametricModel::from_text("nope\n").is_err());
        assert!(ParametricModel::from_text("kernelpa-parametric v1\nend\n").is_err()); // no domain/terms
        assert!(ParametricModel::from_text(
            "kernelpa-parametric v1\ndomain = original\nterm = 0,1,1.0,0.0\n"
        )
        .is_err()); // truncated
        assert!(ParametricModel::from_text(
            "kernelpa-parametric v1\ndomain = sideways\nterm = 0,1,1.0,0.0\nend\n"
        )
        .is_err());
        assert!(ParametricModel::from_text(
            "kernelpa-parametric v1\ndomain = original\nterm = 0,0,1.0,0.0\nend\n"
        )
        .is_err()); // exponent 0
    }
}
