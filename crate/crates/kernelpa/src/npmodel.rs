//! End-to-end non-parametric behavioral model: orthogonalized regressors,
//! per-basis kernel function estimates, prediction, contribution analysis,
//! and pruning.
//!
//! Fitting runs the pipeline regressor set -> Gram-Schmidt -> per-basis
//! magnitude/phase transform -> kernel smoothing. Each basis k is estimated
//! against the rotated target `z_k(n) = r(n) e^{-j angle(u_k(n))}` where
//! `r` is the residual left by the previously estimated bases; estimating on
//! the running residual absorbs the cross-talk that magnitude coupling
//! leaves between orthogonal columns. An optional second pass re-estimates
//! every basis against the residual of all the others.
//!
//! A fitted model stores everything needed to reproduce the transform on new
//! data: the basis descriptors, the frozen Gram-Schmidt projection table and
//! norms, and one smoothed amplitude function per basis.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{estimate_function, KernelFunctionEstimate};
use crate::metrics::{acepr_db, nmse_db};
use crate::regressor::{
    apply_projection_table, build_regressor_set, enumerate_descriptors, gram_schmidt,
    BasisDescriptor, OrthogonalBasis,
};
use crate::signal::ComplexSignal;

/// Fitting options beyond the core parameters.
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    /// Run one extra pass in which each basis is re-estimated against the
    /// residual of all other bases. Off by default.
    pub residual_refit: bool,
}

/// One basis of a fitted model: its descriptor, the smoothed amplitude
/// function (absent only for degenerate columns), and an active flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEntry {
    descriptor: BasisDescriptor,
    estimate: Option<KernelFunctionEstimate>,
    active: bool,
}

impl BasisEntry {
    pub fn descriptor(&self) -> &BasisDescriptor {
        &self.descriptor
    }

    pub fn estimate(&self) -> Option<&KernelFunctionEstimate> {
        self.estimate.as_ref()
    }

    pub fn active(&self) -> bool {
        self.active
    }
}

/// One line of a contribution analysis: a lag subset and the incremental
/// metric change from adding its block of bases.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRow {
    /// Lag subset in ascending order, e.g. `0;2`.
    pub subset: String,
    /// Incremental NMSE change in dB (first row: NMSE of the first block).
    pub dnmse_db: f64,
    /// Incremental ACEPR change in dB; NaN when ACEPR is unavailable for the
    /// record (bandwidth too wide for adjacent channels).
    pub dacepr_db: f64,
}

/// Cumulative contribution analysis over subset blocks, in evaluation order.
///
/// Rows telescope: the incremental values sum exactly to the totals, because
/// each row is the difference of consecutive cumulative metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ContributionReport {
    rows: Vec<ContributionRow>,
    total_nmse_db: f64,
    total_acepr_db: f64,
}

impl ContributionReport {
    pub fn rows(&self) -> &[ContributionRow] {
        &self.rows
    }

    pub fn total_nmse_db(&self) -> f64 {
        self.total_nmse_db
    }

    pub fn total_acepr_db(&self) -> f64 {
        self.total_acepr_db
    }

    /// Evaluation order as subset labels.
    pub fn order(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.subset.as_str()).collect()
    }

    /// Machine-readable CSV with the stable header
    /// `basis,subset,dnmse_db,dacepr_db` and a trailing `total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("basis,subset,dnmse_db,dacepr_db\n");
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{:?},{:?}\n",
                i + 1,
                r.subset,
                r.dnmse_db,
                r.dacepr_db
            ));
        }
        out.push_str(&format!(
            "total,,{:?},{:?}\n",
            self.total_nmse_db, self.total_acepr_db
        ));
        out
    }

    /// Aligned-column text table for terminal reports.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:<12} {:>12} {:>12}\n",
            "basis", "subset", "dNMSE [dB]", "dACEPR [dB]"
        ));
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{:<6} {:<12} {:>12.2} {:>12.2}\n",
                i + 1,
                r.subset,
                r.dnmse_db,
                r.dacepr_db
            ));
        }
        out.push_str(&format!(
            "{:<6} {:<12} {:>12.2} {:>12.2}\n",
            "total", "", self.total_nmse_db, self.total_acepr_db
        ));
        out
    }
}

/// A fitted non-parametric model.
#[derive(Debug, Clone, PartialEq)]
pub struct NonParametricModel {
    m_depth: usize,
    p_max: usize,
    entries: Vec<BasisEntry>,
    projections: Vec<Vec<Complex64>>,
    norms: Vec<f64>,
    degenerate: Vec<bool>,
    grid_points: usize,
    aperture_fraction: f64,
    training_len: usize,
    training_label: String,
    training_report: ContributionReport,
}

impl NonParametricModel {
    pub fn m_depth(&self) -> usize {
        self.m_depth
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn aperture_fraction(&self) -> f64 {
        self.aperture_fraction
    }

    pub fn projections(&self) -> &[Vec<Complex64>] {
        &self.projections
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn training_len(&self) -> usize {
        self.training_len
    }

    pub fn training_label(&self) -> &str {
        &self.training_label
    }

    /// Contribution analysis recorded on the training data at fit time;
    /// [`Self::prune`] thresholds against these rows.
    pub fn training_report(&self) -> &ContributionReport {
        &self.training_report
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.active).count()
    }

    /// Column ranges of the per-subset blocks, paired with the subset label.
    fn subset_blocks(&self) -> Vec<(String, std::ops::Range<usize>)> {
        subset_blocks_of(&descriptor_list(&self.entries))
    }

    /// Predicted output for a new input record. The output holds one sample
    /// per input sample from index `m_depth` on (earlier samples have
    /// incomplete delay history and produce no output).
    pub fn predict(&self, u: &ComplexSignal) -> Result<ComplexSignal> {
        if self.active_count() == 0 {
            return Err(Error::Estimation(
                "model has no active bases left".into(),
            ));
        }
        let matrix = build_regressor_set(u, self.m_depth, self.p_max)?;
        let ortho = apply_projection_table(&matrix, &self.projections, &self.norms, &self.degenerate)?;
        let n = matrix.n_rows();

        let partials: Vec<Vec<Complex64>> = self
            .entries
            .par_iter()
            .zip(ortho.par_iter())
            .filter_map(|(entry, col)| {
                if !entry.active {
                    return None;
                }
                let est = entry.estimate.as_ref()?;
                Some(
                    col.iter()
                        .map(|v| {
                            let mag = v.norm();
                            if mag == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                est.evaluate_unchecked(mag) * (v / mag)
                            }
                        })
                        .collect(),
                )
            })
            .collect();

        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for p in &partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        u.with_samples(out, format!("predict({})", u.label()))
    }

    /// Cumulative contribution analysis of this model on the given records.
    /// `u` and `y` are full-length aligned records; the first `m_depth`
    /// samples are excluded as delay-history warm-up.
    pub fn contribution_table(
        &self,
        u: &ComplexSignal,
        y: &ComplexSignal,
    ) -> Result<ContributionReport> {
        check_aligned(u, y)?;
        let matrix = build_regressor_set(u, self.m_depth, self.p_max)?;
        let ortho = apply_projection_table(&matrix, &self.projections, &self.norms, &self.degenerate)?;
        let target = &y.samples()[self.m_depth..];

        let contributions: Vec<Vec<Complex64>> = self
            .entries
            .par_iter()
            .zip(ortho.par_iter())
            .map(|(entry, col)| match (&entry.estimate, entry.active) {
                (Some(est), true) => col
                    .iter()
                    .map(|v| {
                        let mag = v.norm();
                        if mag == 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            est.evaluate_unchecked(mag) * (v / mag)
                        }
                    })
                    .collect(),
                _ => vec![Complex64::new(0.0, 0.0); col.len()],
            })
            .collect();

        let active_blocks: Vec<(String, std::ops::Range<usize>)> = self
            .subset_blocks()
            .into_iter()
            .filter(|(_, range)| range.clone().any(|k| self.entries[k].active))
            .collect();
        report_from_contributions(
            &active_blocks,
            &contributions,
            target,
            y.sample_rate_hz(),
            y.bandwidth_hz(),
        )
    }

    /// Returns a copy with every subset block whose recorded training
    /// contribution satisfies `|dNMSE| < |threshold_db|` deactivated. The
    /// first block (the static carrier function) is never pruned, and stored
    /// estimates are untouched — pruning only clears active flags.
    pub fn prune(&self, threshold_db: f64) -> Result<NonParametricModel> {
        if !(threshold_db.is_finite() && threshold_db < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prune threshold must be a negative dB value, got {threshold_db}"
            )));
        }
        let limit = threshold_db.abs();
        let mut pruned = self.clone();
        for (i, (label, range)) in self.subset_blocks().into_iter().enumerate() {
            if i == 0 {
                continue;
            }
            let row = self.training_report.rows().iter().find(|r| r.subset == label);
            if let Some(row) = row {
                if row.dnmse_db.abs() < limit {
                    for k in range {
                        pruned.entries[k].active = false;
                    }
                }
            }
        }
        Ok(pruned)
    }

    /// Deployment cost per output sample in FLOPs, under fixed counting
    /// rules: complex multiply 6, complex add/subtract 2, real multiply or
    /// add 1, magnitude 4 (squared magnitude 3 plus square root 1), scaling a
    /// complex by a real 2, table lookup with linear interpolation 4.
    ///
    /// The count includes reconstructing every orthogonal column up to the
    /// highest active one (inactive earlier columns are still needed by the
    /// projection recurrence), then per active basis one magnitude, one
    /// lookup, one unit-phase division (2) and one complex multiply, plus the
    /// complex additions combining the active contributions.
    pub fn flops_per_sample(&self) -> usize {
        let k_max = match (0..self.entries.len()).rev().find(|&k| self.entries[k].active) {
            Some(k) => k,
            None => return 0,
        };
        let mut flops = 0usize;
        for k in 0..=k_max {
            if self.degenerate[k] {
                continue;
            }
            let d = self.entries[k].descriptor.dimension();
            if d > 1 {
                // d-1 magnitudes, d-2 real products to combine them, and one
                // real-times-complex scale of the carrier sample.
                flops += 4 * (d - 1) + (d - 2) + 2;
            }
            // Projection recurrence: k complex multiply-subtracts, then the
            // 1/norm scale.
            flops += 8 * k + 2;
        }
        let active = self.active_count();
        for (k, e) in self.entries.iter().enumerate() {
            if e.active && !self.degenerate[k] {
                flops += 4 + 4 + 2 + 6;
            }
        }
        flops + 2 * active.saturating_sub(1)
    }
}

fn descriptor_list(entries: &[BasisEntry]) -> Vec<BasisDescriptor> {
    entries.iter().map(|e| e.descriptor.clone()).collect()
}

/// Groups consecutive columns sharing a lag subset into blocks.
fn subset_blocks_of(descriptors: &[BasisDescriptor]) -> Vec<(String, std::ops::Range<usize>)> {
    let mut blocks: Vec<(String, std::ops::Range<usize>)> = Vec::new();
    for (k, d) in descriptors.iter().enumerate() {
        let label = d
            .subset_ascending()
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(";");
        match blocks.last_mut() {
            Some((last, range)) if *last == label => range.end = k + 1,
            _ => blocks.push((label, k..k + 1)),
        }
    }
    blocks
}

fn check_aligned(u: &ComplexSignal, y: &ComplexSignal) -> Result<()> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch(format!(
            "input has {} samples, output {}",
            u.len(),
            y.len()
        )));
    }
    if u.sample_rate_hz() != y.sample_rate_hz() {
        return Err(Error::InvalidParameter(format!(
            "sample rates differ: {} vs {}",
            u.sample_rate_hz(),
            y.sample_rate_hz()
        )));
    }
    Ok(())
}

/// ACEPR, or NaN when the record cannot support adjacent-channel analysis.
fn acepr_or_nan(
    reference: &[Complex64],
    estimate: &[Complex64],
    sample_rate_hz: f64,
    bandwidth_hz: f64,
) -> f64 {
    acepr_db(reference, estimate, sample_rate_hz, bandwidth_hz).unwrap_or(f64::NAN)
}

/// Cumulative block metrics -> telescoping report.
fn report_from_contributions(
    blocks: &[(String, std::ops::Range<usize>)],
    contributions: &[Vec<Complex64>],
    target: &[Complex64],
    sample_rate_hz: f64,
    bandwidth_hz: f64,
) -> Result<ContributionReport> {
    if blocks.is_empty() {
        return Err(Error::Estimation("no blocks to analyze".into()));
    }
    let n = target.len();
    let mut cumulative = vec![Complex64::new(0.0, 0.0); n];
    let mut rows = Vec::with_capacity(blocks.len());
    let mut prev_nmse = 0.0f64;
    let mut prev_acepr = 0.0f64;
    let mut total_nmse = 0.0f64;
    let mut total_acepr = 0.0f64;
    for (i, (label, range)) in blocks.iter().enumerate() {
        for k in range.clone() {
            for (c, v) in cumulative.iter_mut().zip(&contributions[k]) {
                *c += v;
            }
        }
        let nmse = nmse_db(target, &cumulative)?;
        let acepr = acepr_or_nan(target, &cumulative, sample_rate_hz, bandwidth_hz);
        rows.push(ContributionRow {
            subset: label.clone(),
            dnmse_db: if i == 0 { nmse } else { nmse - prev_nmse },
            dacepr_db: if i == 0 { acepr } else { acepr - prev_acepr },
        });
        prev_nmse = nmse;
        prev_acepr = acepr;
        total_nmse = nmse;
        total_acepr = acepr;
    }
    Ok(ContributionReport {
        rows,
        total_nmse_db: total_nmse,
        total_acepr_db: total_acepr,
    })
}

/// Magnitude/phase transform of an orthogonal basis against an output record
/// trimmed to the basis row count: returns the per-column magnitude
/// sequences, the rotated target `z(n) = y(n) e^{-j angle(u_0(n))}` built
/// from the first column's phase, and a validity mask that is false where
/// the first column is exactly zero (undefined phase; such samples are
/// excluded from estimation).
pub fn magnitude_phase_transform(
    basis: &OrthogonalBasis,
    y: &[Complex64],
) -> Result<(Vec<Vec<f64>>, Vec<Complex64>, Vec<bool>)> {
    if y.len() != basis.n_rows() {
        return Err(Error::LengthMismatch(format!(
            "output record has {} samples, basis has {} rows",
            y.len(),
            basis.n_rows()
        )));
    }
    let x_columns: Vec<Vec<f64>> = basis
        .columns()
        .iter()
        .map(|(_, col)| col.iter().map(|v| v.norm()).collect())
        .collect();
    let first = &basis.columns()[0].1;
    let mut z = Vec::with_capacity(y.len());
    let mut valid = Vec::with_capacity(y.len());
    for (v, yn) in first.iter().zip(y) {
        let mag = v.norm();
        if mag == 0.0 {
            z.push(Complex64::new(0.0, 0.0));
            valid.push(false);
        } else {
            z.push(yn * (v / mag).conj());
            valid.push(true);
        }
    }
    Ok((x_columns, z, valid))
}

/// Fits a non-parametric model with default options.
pub fn fit(
    u: &ComplexSignal,
    y: &ComplexSignal,
    m_depth: usize,
    p_max: usize,
    grid_points: usize,
    aperture_fraction: f64,
) -> Result<NonParametricModel> {
    fit_with_options(
        u,
        y,
        m_depth,
        p_max,
        grid_points,
        aperture_fraction,
        &FitOptions::default(),
    )
}

/// Fits a non-parametric model.
///
/// `u` and `y` must be aligned, equal-length records at the same rate. The
/// first `m_depth` samples are used only as delay history. Bases are
/// estimated sequentially in the fixed basis order, each against the
/// residual left by the previous ones; with `residual_refit` a second pass
/// re-estimates each basis against the residual of all others.
pub fn fit_with_options(
    u: &ComplexSignal,
    y: &ComplexSignal,
    m_depth: usize,
    p_max: usize,
    grid_points: usize,
    aperture_fraction: f64,
    options: &FitOptions,
) -> Result<NonParametricModel> {
    check_aligned(u, y)?;
    let matrix = build_regressor_set(u, m_depth, p_max)?;
    let basis = gram_schmidt(&matrix)?;
    let target = &y.samples()[m_depth..];
    let n = basis.n_rows();
    let k_total = basis.columns().len();

    let mut entries: Vec<BasisEntry> = Vec::with_capacity(k_total);
    let mut contributions: Vec<Vec<Complex64>> = Vec::with_capacity(k_total);
    let mut residual: Vec<Complex64> = target.to_vec();

    for k in 0..k_total {
        let (descriptor, column) = &basis.columns()[k];
        if basis.degenerate_flags()[k] {
            entries.push(BasisEntry {
                descriptor: descriptor.clone(),
                estimate: None,
                active: false,
            });
            contributions.push(vec![Complex64::new(0.0, 0.0); n]);
            continue;
        }
        let estimate = estimate_column(column, &residual, grid_points, aperture_fraction)
            .map_err(|e| annotate_basis(e, descriptor))?;
        let contribution = column_contribution(&estimate, column);
        for (r, c) in residual.iter_mut().zip(&contribution) {
            *r -= c;
        }
        entries.push(BasisEntry {
            descriptor: descriptor.clone(),
            estimate: Some(estimate),
            active: true,
        });
        contributions.push(contribution);
    }

    if options.residual_refit {
        for k in 0..k_total {
            if entries[k].estimate.is_none() {
                continue;
            }
            let column = &basis.columns()[k].1;
            // Residual of all other bases: add this basis's current
            // contribution back before re-estimating it.
            for (r, c) in residual.iter_mut().zip(&contributions[k]) {
                *r += c;
            }
            let estimate = estimate_column(column, &residual, grid_points, aperture_fraction)
                .map_err(|e| annotate_basis(e, &entries[k].descriptor))?;
            let contribution = column_contribution(&estimate, column);
            for (r, c) in residual.iter_mut().zip(&contribution) {
                *r -= c;
            }
            entries[k].estimate = Some(estimate);
            contributions[k] = contribution;
        }
    }

    let blocks = subset_blocks_of(&descriptor_list(&entries));
    let training_report = report_from_contributions(
        &blocks,
        &contributions,
        target,
        y.sample_rate_hz(),
        y.bandwidth_hz(),
    )?;

    let model = NonParametricModel {
        m_depth,
        p_max,
        entries,
        projections: basis.projections().to_vec(),
        norms: basis.norms().to_vec(),
        degenerate: basis.degenerate_flags().to_vec(),
        grid_points,
        aperture_fraction,
        training_len: u.len(),
        training_label: u.label().to_string(),
        training_report,
    };
    if model.active_count() == 0 {
        return Err(Error::Degeneracy(
            "all regressor columns were degenerate; nothing to estimate".into(),
        ));
    }
    Ok(model)
}

/// Estimates one basis function against a (residual) target, excluding
/// samples where the column is exactly zero (undefined phase).
fn estimate_column(
    column: &[Complex64],
    residual: &[Complex64],
    grid_points: usize,
    aperture_fraction: f64,
) -> Result<KernelFunctionEstimate> {
    let mut xs = Vec::with_capacity(column.len());
    let mut zs = Vec::with_capacity(column.len());
    for (v, r) in column.iter().zip(residual) {
        let mag = v.norm();
        if mag > 0.0 {
            xs.push(mag);
            zs.push(r * (v / mag).conj());
        }
    }
    estimate_function(&xs, &zs, grid_points, aperture_fraction)
}

fn column_contribution(estimate: &KernelFunctionEstimate, column: &[Complex64]) -> Vec<Complex64> {
    column
        .iter()
        .map(|v| {
            let mag = v.norm();
            if mag == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                estimate.evaluate_unchecked(mag) * (v / mag)
            }
        })
        .collect()
}

fn annotate_basis(e: Error, d: &BasisDescriptor) -> Error {
    match e {
        Error::Estimation(msg) => Error::Estimation(format!("basis {}: {msg}", d.label())),
        Error::InvalidParameter(msg) => {
            Error::InvalidParameter(format!("basis {}: {msg}", d.label()))
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Serialization: versioned, self-describing, value-exact text format.
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &str = "kernelpa-model v1";

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('\\') => out.push('\\'),
                Some(other) => {
                    out.push('\\');
                    out.push(other);
                }
                None => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

impl NonParametricModel {
    /// Serializes the model to its versioned text format. Floats use the
    /// shortest representation that parses back to the identical value, so
    /// save/load round-trips are value-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MODEL_MAGIC);
        out.push('\n');
        out.push_str(&format!("m_depth = {}\n", self.m_depth));
        out.push_str(&format!("p_max = {}\n", self.p_max));
        out.push_str(&format!("grid_points = {}\n", self.grid_points));
        out.push_str(&format!("aperture_fraction = {:?}\n", self.aperture_fraction));
        out.push_str(&format!("training_len = {}\n", self.training_len));
        out.push_str(&format!("training_label = {}\n", escape(&self.training_label)));
        out.push_str(&format!(
            "total_nmse_db = {:?}\n",
            self.training_report.total_nmse_db
        ));
        out.push_str(&format!(
            "total_acepr_db = {:?}\n",
            self.training_report.total_acepr_db
        ));
        for r in &self.training_report.rows {
            out.push_str(&format!(
                "row {} {:?} {:?}\n",
                r.subset, r.dnmse_db, r.dacepr_db
            ));
        }
        for (k, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "basis {k} {} {} {:?} {}\n",
                e.descriptor.label(),
                if e.active { 1 } else { 0 },
                self.norms[k],
                if self.degenerate[k] { 1 } else { 0 },
            ));
        }
        for (k, row) in self.projections.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                out.push_str(&format!("proj {k} {l} {:?} {:?}\n", c.re, c.im));
            }
        }
        for (k, e) in self.entries.iter().enumerate() {
            if let Some(est) = &e.estimate {
                let (lo, hi) = est.support();
                out.push_str(&format!(
                    "grid_meta {k} {:?} {:?} {:?} {:?}\n",
                    lo,
                    hi,
                    est.aperture(),
                    est.aperture_fraction()
                ));
                for i in 0..est.grid().len() {
                    out.push_str(&format!(
                        "grid {k} {i} {:?} {:?} {} {:?} {:?}\n",
                        est.grid()[i],
                        est.weight_mass()[i],
                        if est.defined()[i] { 1 } else { 0 },
                        est.values()[i].re,
                        est.values()[i].im,
                    ));
                }
            }
        }
        out.push_str("end\n");
        out
    }

    /// Parses the versioned text format produced by [`Self::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::Format("empty model file".into()))?;
        if first.trim() != MODEL_MAGIC {
            return Err(Error::Format(format!(
                "not a model file (expected header '{MODEL_MAGIC}')"
            )));
        }

        let mut m_depth: Option<usize> = None;
        let mut p_max: Option<usize> = None;
        let mut grid_points: Option<usize> = None;
        let mut aperture_fraction: Option<f64> = None;
        let mut training_len: Option<usize> = None;
        let mut training_label = String::new();
        let mut total_nmse_db: Option<f64> = None;
        let mut total_acepr_db: Option<f64> = None;
        let mut rows: Vec<ContributionRow> = Vec::new();
        // Per-basis staging: label, active, norm, degenerate.
        let mut basis_lines: Vec<(String, bool, f64, bool)> = Vec::new();
        let mut proj_entries: Vec<(usize, usize, Complex64)> = Vec::new();
        struct GridStage {
            lo: f64,
            hi: f64,
            aperture: f64,
            aperture_fraction: f64,
            points: Vec<(usize, f64, f64, bool, Complex64)>,
        }
        let mut grids: std::collections::BTreeMap<usize, GridStage> =
            std::collections::BTreeMap::new();
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
            // Scalar fields are `key = value`; bulk data lines (row/basis/
            // proj/grid) never contain '='.
            if let Some((key, value)) = line.split_once('=') {
                {
                    let key = key.trim();
                    let value = value.trim();
                    match key {
                        "m_depth" => m_depth = Some(parse_num(value, line_no, "m_depth")?),
                        "p_max" => p_max = Some(parse_num(value, line_no, "p_max")?),
                        "grid_points" => {
                            grid_points = Some(parse_num(value, line_no, "grid_points")?)
                        }
                        "aperture_fraction" => {
                            aperture_fraction =
                                Some(parse_num(value, line_no, "aperture_fraction")?)
                        }
                        "training_len" => {
                            training_len = Some(parse_num(value, line_no, "training_len")?)
                        }
                        "training_label" => training_label = unescape(value),
                        "total_nmse_db" => {
                            total_nmse_db = Some(parse_num(value, line_no, "total_nmse_db")?)
                        }
                        "total_acepr_db" => {
                            total_acepr_db = Some(parse_num(value, line_no, "total_acepr_db")?)
                        }
                        other => {
                            return Err(Error::format_at(
                                line_no,
                                format!("unknown key '{other}'"),
                            ))
                        }
                    }
                    continue;
                }
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("row") => {
                    let subset = parts
                        .next()
                        .ok_or_else(|| Error::format_at(line_no, "row needs a subset label"))?
                        .to_string();
                    let dnmse_db: f64 = parse_next(&mut parts, line_no, "row dnmse")?;
                    let dacepr_db: f64 = parse_next(&mut parts, line_no, "row dacepr")?;
                    rows.push(ContributionRow {
                        subset,
                        dnmse_db,
                        dacepr_db,
                    });
                }
                Some("basis") => {
                    let k: usize = parse_next(&mut parts, line_no, "basis index")?;
                    if k != basis_lines.len() {
                        return Err(Error::format_at(line_no, "basis lines out of order"));
                    }
                    let label = parts
                        .next()
                        .ok_or_else(|| Error::format_at(line_no, "basis needs a label"))?
                        .to_string();
                    let active: u8 = parse_next(&mut parts, line_no, "basis active flag")?;
                    let norm: f64 = parse_next(&mut parts, line_no, "basis norm")?;
                    let degenerate: u8 = parse_next(&mut parts, line_no, "basis degenerate flag")?;
                    basis_lines.push((label, active != 0, norm, degenerate != 0));
                }
                Some("proj") => {
                    let k: usize = parse_next(&mut parts, line_no, "proj row")?;
                    let l: usize = parse_next(&mut parts, line_no, "proj col")?;
                    let re: f64 = parse_next(&mut parts, line_no, "proj re")?;
                    let im: f64 = parse_next(&mut parts, line_no, "proj im")?;
                    proj_entries.push((k, l, Complex64::new(re, im)));
                }
                Some("grid_meta") => {
                    let k: usize = parse_next(&mut parts, line_no, "grid_meta basis")?;
                    let lo: f64 = parse_next(&mut parts, line_no, "grid_meta lo")?;
                    let hi: f64 = parse_next(&mut parts, line_no, "grid_meta hi")?;
                    let aperture: f64 = parse_next(&mut parts, line_no, "grid_meta aperture")?;
                    let aperture_fraction: f64 =
                        parse_next(&mut parts, line_no, "grid_meta fraction")?;
                    if grids
                        .insert(
                            k,
                            GridStage {
                                lo,
                                hi,
                                aperture,
                                aperture_fraction,
                                points: Vec::new(),
                            },
                        )
                        .is_some()
                    {
                        return Err(Error::format_at(line_no, format!("duplicate grid_meta {k}")));
                    }
                }
                Some("grid") => {
                    let k: usize = parse_next(&mut parts, line_no, "grid basis")?;
                    let i: usize = parse_next(&mut parts, line_no, "grid index")?;
                    let x: f64 = parse_next(&mut parts, line_no, "grid x")?;
                    let mass: f64 = parse_next(&mut parts, line_no, "grid mass")?;
                    let defined: u8 = parse_next(&mut parts, line_no, "grid defined flag")?;
                    let re: f64 = parse_next(&mut parts, line_no, "grid re")?;
                    let im: f64 = parse_next(&mut parts, line_no, "grid im")?;
                    let stage = grids.get_mut(&k).ok_or_else(|| {
                        Error::format_at(line_no, format!("grid line before grid_meta for {k}"))
                    })?;
                    stage
                        .points
                        .push((i, x, mass, defined != 0, Complex64::new(re, im)));
                }
                Some(other) => {
                    return Err(Error::format_at(
                        line_no,
                        format!("unrecognized line kind '{other}'"),
                    ))
                }
                None => {}
            }
        }
        if !saw_end {
            return Err(Error::Format("model file is truncated (missing 'end')".into()));
        }

        let m_depth = m_depth.ok_or_else(|| Error::Format("missing m_depth".into()))?;
        let p_max = p_max.ok_or_else(|| Error::Format("missing p_max".into()))?;
        let grid_points = grid_points.ok_or_else(|| Error::Format("missing grid_points".into()))?;
        let aperture_fraction =
            aperture_fraction.ok_or_else(|| Error::Format("missing aperture_fraction".into()))?;
        let training_len =
            training_len.ok_or_else(|| Error::Format("missing training_len".into()))?;
        let total_nmse_db =
            total_nmse_db.ok_or_else(|| Error::Format("missing total_nmse_db".into()))?;
        let total_acepr_db =
            total_acepr_db.ok_or_else(|| Error::Format("missing total_acepr_db".into()))?;

        let descriptors = enumerate_descriptors(m_depth, p_max)?;
        if basis_lines.len() != descriptors.len() {
            return Err(Error::Format(format!(
                "model lists {} bases, structure (m_depth {m_depth}, p_max {p_max}) needs {}",
                basis_lines.len(),
                descriptors.len()
            )));
        }
        let k_total = descriptors.len();
        let mut norms = Vec::with_capacity(k_total);
        let mut degenerate = Vec::with_capacity(k_total);
        let mut active_flags = Vec::with_capacity(k_total);
        for (k, (label, active, norm, degen)) in basis_lines.iter().enumerate() {
            if *label != descriptors[k].label() {
                return Err(Error::Format(format!(
                    "basis {k} label '{label}' does not match the canonical order ('{}')",
                    descriptors[k].label()
                )));
            }
            norms.push(*norm);
            degenerate.push(*degen);
            active_flags.push(*active);
        }

        let mut projections = vec![Vec::new(); k_total];
        for (k, row) in projections.iter_mut().enumerate() {
            row.resize(k, Complex64::new(0.0, 0.0));
        }
        for (k, l, c) in proj_entries {
            if k >= k_total || l >= k {
                return Err(Error::Format(format!(
                    "projection entry ({k}, {l}) outside the lower triangle"
                )));
            }
            projections[k][l] = c;
        }

        let mut entries = Vec::with_capacity(k_total);
        for (k, descriptor) in descriptors.into_iter().enumerate() {
            let estimate = match grids.remove(&k) {
                Some(stage) => {
                    let t = stage.points.len();
                    let mut grid = vec![0.0; t];
                    let mut mass = vec![0.0; t];
                    let mut defined = vec![false; t];
                    let mut values = vec![Complex64::new(0.0, 0.0); t];
                    for (i, x, m, d, v) in stage.points {
                        if i >= t {
                            return Err(Error::Format(format!(
                                "grid index {i} out of range for basis {k}"
                            )));
                        }
                        grid[i] = x;
                        mass[i] = m;
                        defined[i] = d;
                        values[i] = v;
                    }
                    Some(KernelFunctionEstimate::from_parts(
                        grid,
                        values,
                        defined,
                        mass,
                        stage.aperture,
                        stage.aperture_fraction,
                        (stage.lo, stage.hi),
                    )?)
                }
                None => None,
            };
            if active_flags[k] && estimate.is_none() {
                return Err(Error::Format(format!(
                    "basis {k} is active but has no stored function"
                )));
            }
            entries.push(BasisEntry {
                descriptor,
                estimate,
                active: active_flags[k],
            });
        }
        if !grids.is_empty() {
            return Err(Error::Format("grid data for out-of-range basis index".into()));
        }

        let model = NonParametricModel {
            m_depth,
            p_max,
            entries,
            projections,
            norms,
            degenerate,
            grid_points,
            aperture_fraction,
            training_len,
            training_label,
            training_report: ContributionReport {
                rows,
                total_nmse_db,
                total_acepr_db,
            },
        };
        if model.active_count() == 0 {
            return Err(Error::Format("model has no active bases".into()));
        }
        Ok(model)
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line_no: usize, what: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::format_at(line_no, format!("bad {what}: '{value}'")))
}

fn parse_next<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line_no: usize,
    what: &str,
) -> Result<T> {
    let tok = parts
        .next()
        .ok_or_else(|| Error::format_at(line_no, format!("missing {what}")))?;
    parse_num(tok, line_no, what)
}
