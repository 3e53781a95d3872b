//! Memory regressor construction and reversible orthogonalization.
//!
//! A regressor column is built from a subset of memory lags: the complex
//! sample at one "carrier" lag times the magnitudes of the samples at the
//! remaining lags in the subset. The full set enumerates every lag subset up
//! to a maximum dimension, so a depth-M, degree-p configuration spans both the
//! plain delayed samples and their envelope-coupled (augmented) variants.
//!
//! Columns are then orthogonalized with a two-pass modified Gram-Schmidt
//! sweep. The subtraction coefficients and pre-normalization norms are
//! recorded, which makes the transform exactly reversible and lets fitted
//! models replay it on new records.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// Relative threshold below which a post-subtraction column is declared
/// degenerate (linearly dependent on its predecessors) and zeroed.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Identifies one regressor column: the lag subset it is built from and the
/// lag whose complex sample carries the phase.
///
/// Lags are stored in descending order (`m_1 > m_2 > ... > m_p >= 0`); the
/// column value at sample `n` is
/// `u(n - carrier) * prod_{m in subset, m != carrier} |u(n - m)|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisDescriptor {
    subset: Vec<usize>,
    carrier_lag: usize,
}

impl BasisDescriptor {
    /// Builds a descriptor from a set of distinct lags and a carrier lag that
    /// must be one of them.
    pub fn new(mut lags: Vec<usize>, carrier_lag: usize) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidParameter("empty lag subset".into()));
        }
        lags.sort_unstable_by(|a, b| b.cmp(a));
        if lags.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(format!(
                "duplicate lags in subset {lags:?}"
            )));
        }
        if !lags.contains(&carrier_lag) {
            return Err(Error::InvalidParameter(format!(
                "carrier lag {carrier_lag} not in subset {lags:?}"
            )));
        }
        Ok(Self {
            subset: lags,
            carrier_lag,
        })
    }

    /// Lags in descending order.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn carrier_lag(&self) -> usize {
        self.carrier_lag
    }

    /// Subset size p.
    pub fn dimension(&self) -> usize {
        self.subset.len()
    }

    pub fn max_lag(&self) -> usize {
        self.subset[0]
    }

    /// Lags in ascending order, used for grouping and display.
    pub fn subset_ascending(&self) -> Vec<usize> {
        let mut v = self.subset.clone();
        v.reverse();
        v
    }

    /// Compact text form, e.g. `0;2@0` for subset {0,2} with carrier 0.
    pub fn label(&self) -> String {
        let lags: Vec<String> = self.subset_ascending().iter().map(|l| l.to_string()).collect();
        format!("{}@{}", lags.join(";"), self.carrier_lag)
    }

    /// Column value for one sample index `n >= max lag` of `u`.
    fn eval(&self, u: &[Complex64], n: usize) -> Complex64 {
        let mut v = u[n - self.carrier_lag];
        for &m in &self.subset {
            if m != self.carrier_lag {
                v *= u[n - m].norm();
            }
        }
        v
    }
}

/// An ordered set of regressor columns over a common effective sample range.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix {
    columns: Vec<(BasisDescriptor, Vec<Complex64>)>,
    n_rows: usize,
}

impl RegressorMatrix {
    /// Assembles a matrix from pre-built columns, validating shape.
    pub fn from_columns(columns: Vec<(BasisDescriptor, Vec<Complex64>)>) -> Result<Self> {
        let n_rows = columns
            .first()
            .map(|(_, c)| c.len())
            .ok_or_else(|| Error::InvalidParameter("matrix needs at least one column".into()))?;
        if n_rows == 0 {
            return Err(Error::InvalidParameter("columns are empty".into()));
        }
        if columns.iter().any(|(_, c)| c.len() != n_rows) {
            return Err(Error::LengthMismatch(
                "regressor columns differ in length".into(),
            ));
        }
        Ok(Self { columns, n_rows })
    }

    pub fn columns(&self) -> &[(BasisDescriptor, Vec<Complex64>)] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &BasisDescriptor> {
        self.columns.iter().map(|(d, _)| d)
    }
}

/// Enumerates the basis descriptors for memory depth `m_depth` and maximum
/// subset dimension `p_max`, in the canonical column order: dimension 1 by
/// ascending lag, then each higher dimension with subsets in lexicographic
/// order of their ascending lag lists, every subset contributing one column
/// per carrier lag (carriers ascending).
pub fn enumerate_descriptors(m_depth: usize, p_max: usize) -> Result<Vec<BasisDescriptor>> {
    if p_max == 0 || p_max > m_depth + 1 {
        return Err(Error::InvalidParameter(format!(
            "p_max must satisfy 1 <= p_max <= M+1, got p_max {p_max}, M {m_depth}"
        )));
    }
    let mut out = Vec::new();
    for dim in 1..=p_max {
        for subset in combinations(m_depth + 1, dim) {
            for &carrier in &subset {
                out.push(BasisDescriptor::new(subset.clone(), carrier)?);
            }
        }
    }
    Ok(out)
}

/// All `dim`-element subsets of `{0, .., n-1}` in lexicographic order of the
/// ascending representation.
fn combinations(n: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(dim);
    fn rec(start: usize, n: usize, dim: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, dim, cur, out);
            cur.pop();
        }
    }
    rec(0, n, dim, &mut cur, &mut out);
    out
}

/// Number of columns produced by [`enumerate_descriptors`]:
/// `sum_{d=1}^{p_max} C(M+1, d) * d`.
pub fn column_count(m_depth: usize, p_max: usize) -> usize {
    (1..=p_max).map(|d| binomial(m_depth + 1, d) * d).sum()
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Builds the full regressor matrix for a record, discarding the first
/// `m_depth` samples of every column so that all columns share a fully
/// populated memory context.
pub fn build_regressor_set(
    u: &ComplexSignal,
    m_depth: usize,
    p_max: usize,
) -> Result<RegressorMatrix> {
    build_regressor_from_samples(u.samples(), m_depth, p_max)
}

/// [`build_regressor_set`] on a bare sample slice.
pub fn build_regressor_from_samples(
    u: &[Complex64],
    m_depth: usize,
    p_max: usize,
) -> Result<RegressorMatrix> {
    let descriptors = enumerate_descriptors(m_depth, p_max)?;
    if u.len() <= 10 * (m_depth + 1) {
        return Err(Error::InvalidParameter(format!(
            "record of {} samples is too short for memory depth {m_depth} (need > {})",
            u.len(),
            10 * (m_depth + 1)
        )));
    }
    let n_rows = u.len() - m_depth;
    let columns: Vec<(BasisDescriptor, Vec<Complex64>)> = descriptors
        .into_par_iter()
        .map(|d| {
            let col: Vec<Complex64> = (m_depth..u.len()).map(|n| d.eval(u, n)).collect();
            (d, col)
        })
        .collect();
    debug_assert!(columns.iter().all(|(_, c)| c.len() == n_rows));
    RegressorMatrix::from_columns(columns)
}

/// An orthogonalized regressor set with everything needed to reverse the
/// transform or replay it on new data: per-column subtraction coefficients
/// against the earlier unit-norm columns, the pre-normalization norms, and
/// degeneracy flags.
#[derive(Debug, Clone)]
pub struct OrthogonalBasis {
    columns: Vec<(BasisDescriptor, Vec<Complex64>)>,
    projections: Vec<Vec<Complex64>>,
    norms: Vec<f64>,
    degenerate: Vec<bool>,
    n_rows: usize,
}

impl OrthogonalBasis {
    /// Unit-norm orthogonal columns (zero vectors where degenerate).
    pub fn columns(&self) -> &[(BasisDescriptor, Vec<Complex64>)] {
        &self.columns
    }

    /// Lower-triangular subtraction table: entry `[k][l]` (l < k) is the
    /// coefficient of unit-norm column l removed from original column k.
    pub fn projections(&self) -> &[Vec<Complex64>] {
        &self.projections
    }

    /// Pre-normalization Euclidean norms (0.0 for degenerate columns).
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

/// Orthogonalizes a regressor matrix by modified Gram-Schmidt in the fixed
/// column order, recording subtraction coefficients and norms.
///
/// Two full subtraction passes are made per column (re-orthogonalization);
/// the passes' coefficients accumulate into a single recorded value, keeping
/// the stored table equal to the direct projection within round-off while
/// pushing residual non-orthogonality to the 1e-14 level even for
/// ill-conditioned inputs. Columns whose residual norm falls below
/// [`DEGENERACY_THRESHOLD`] times their original norm are flagged and zeroed;
/// this is not an error.
pub fn gram_schmidt(r: &RegressorMatrix) -> Result<OrthogonalBasis> {
    if r.n_rows() < r.n_columns() {
        return Err(Error::InvalidParameter(format!(
            "need at least as many rows as columns, got {} rows for {} columns",
            r.n_rows(),
            r.n_columns()
        )));
    }

    let n = r.n_rows();
    let k_total = r.n_columns();
    let mut ortho: Vec<Vec<Complex64>> = Vec::with_capacity(k_total);
    let mut projections: Vec<Vec<Complex64>> = Vec::with_capacity(k_total);
    let mut norms = Vec::with_capacity(k_total);
    let mut degenerate = Vec::with_capacity(k_total);

    for (k, (_, col)) in r.columns().iter().enumerate() {
        let original_norm = vec_norm(col);
        let mut v = col.clone();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k];
        for _pass in 0..2 {
            for (l, q) in ortho.iter().enumerate().take(k) {
                if degenerate[l] {
                    continue;
                }
                let c = dot_conj_first(q, &v);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
                coeffs[l] += c;
            }
        }
        let residual_norm = vec_norm(&v);
        if residual_norm < DEGENERACY_THRESHOLD * original_norm || original_norm == 0.0 {
            ortho.push(vec![Complex64::new(0.0, 0.0); n]);
            norms.push(0.0);
            degenerate.push(true);
        } else {
            let inv = 1.0 / residual_norm;
            for vi in v.iter_mut() {
                *vi *= inv;
            }
            ortho.push(v);
            norms.push(residual_norm);
            degenerate.push(false);
        }
        projections.push(coeffs);
    }

    let columns = r
        .columns()
        .iter()
        .map(|(d, _)| d.clone())
        .zip(ortho)
        .collect();
    Ok(OrthogonalBasis {
        columns,
        projections,
        norms,
        degenerate,
        n_rows: n,
    })
}

/// Reconstructs the original regressor matrix from an orthogonal basis:
/// `u_k = norm_k * q_k + sum_{l<k} P[k][l] * q_l`.
pub fn reverse(b: &OrthogonalBasis) -> Result<RegressorMatrix> {
    let n = b.n_rows();
    let mut out = Vec::with_capacity(b.n_columns());
    for (k, (desc, q)) in b.columns.iter().enumerate() {
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        if !b.degenerate[k] {
            let s = b.norms[k];
            for (ci, qi) in col.iter_mut().zip(q) {
                *ci = s * qi;
            }
        }
        for (l, &c) in b.projections[k].iter().enumerate() {
            if b.degenerate[l] {
                continue;
            }
            let ql = &b.columns[l].1;
            for (ci, qi) in col.iter_mut().zip(ql) {
                *ci += c * qi;
            }
        }
        out.push((desc.clone(), col));
    }
    RegressorMatrix::from_columns(out)
}

/// Replays a recorded orthogonalization on a new regressor matrix: applies
/// the stored subtraction coefficients and norms column by column, producing
/// basis columns on the same amplitude scale the table was trained at.
/// Degenerate training columns map to zero columns.
pub fn apply_projection_table(
    matrix: &RegressorMatrix,
    projections: &[Vec<Complex64>],
    norms: &[f64],
    degenerate: &[bool],
) -> Result<Vec<Vec<Complex64>>> {
    let k_total = matrix.n_columns();
    if projections.len() != k_total || norms.len() != k_total || degenerate.len() != k_total {
        return Err(Error::LengthMismatch(format!(
            "projection table is for {} columns, matrix has {k_total}",
            projections.len()
        )));
    }
    if projections.iter().enumerate().any(|(k, row)| row.len() != k) {
        return Err(Error::Format(
            "projection table is not lower-triangular".into(),
        ));
    }

    let n = matrix.n_rows();
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(k_total);
    for (k, (_, col)) in matrix.columns().iter().enumerate() {
        if degenerate[k] {
            out.push(vec![Complex64::new(0.0, 0.0); n]);
            continue;
        }
        if norms[k] <= 0.0 {
            return Err(Error::Format(format!(
                "non-degenerate column {k} has non-positive norm {}",
                norms[k]
            )));
        }
        let mut v = col.clone();
        for (l, &c) in projections[k].iter().enumerate() {
            let ql = &out[l];
            for (vi, qi) in v.iter_mut().zip(ql) {
                *vi -= c * qi;
            }
        }
        let inv = 1.0 / norms[k];
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        out.push(v);
    }
    Ok(out)
}

/// Computes the dimension-1 projection table analytically from the input's
/// autocorrelation sequence under wide-sense stationarity, instead of from a
/// measured record.
///
/// `r_u[d]` is the autocorrelation at non-negative lag `d` (`E[u*(n) u(n+d)]`,
/// so `r_u[0]` is the average power); negative lags follow by conjugate
/// symmetry. The returned lower-triangular table uses the same convention as
/// [`gram_schmidt`] but is normalized for unit-average-power basis columns:
/// to compare against an empirical table measured on an N-row record, divide
/// the empirical coefficients by sqrt(N).
pub fn projections_from_autocorrelation(
    r_u: &[Complex64],
    m_depth: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if r_u.len() < m_depth + 1 {
        return Err(Error::LengthMismatch(format!(
            "need {} autocorrelation lags, got {}",
            m_depth + 1,
            r_u.len()
        )));
    }
    let r0 = r_u[0];
    if !(r0.re > 0.0) || r0.im.abs() > 1e-9 * r0.re {
        return Err(Error::InvalidParameter(format!(
            "autocorrelation at lag 0 must be real positive, got {r0}"
        )));
    }

    // Gram matrix of the delayed columns per sample:
    // G[j][k] = E[u*(n-j) u(n-k)] = r_u(j - k).
    let gram = |j: usize, k: usize| -> Complex64 {
        if j >= k {
            r_u[j - k]
        } else {
            r_u[k - j].conj()
        }
    };
    let m1 = m_depth + 1;

    // Coordinate-space modified Gram-Schmidt: basis vector k is represented
    // by its coefficients over the original delayed columns, and all inner
    // products are evaluated through the Gram matrix.
    let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, aj) in a.iter().enumerate() {
            if *aj == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (k, bk) in b.iter().enumerate() {
                if *bk == Complex64::new(0.0, 0.0) {
                    continue;
                }
                acc += aj.conj() * bk * gram(j, k);
            }
        }
        acc
    };

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m1);
    let mut degenerate = vec![false; m1];
    let mut table: Vec<Vec<Complex64>> = Vec::with_capacity(m1);
    for k in 0..m1 {
        let mut v = vec![Complex64::new(0.0, 0.0); m1];
        v[k] = Complex64::new(1.0, 0.0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); k];
        let original_norm = gram(k, k).re.sqrt();
        for _pass in 0..2 {
            for l in 0..k {
                if degenerate[l] {
                    continue;
                }
                let c = inner(&basis[l], &v);
                for (vi, bi) in v.iter_mut().zip(&basis[l]) {
                    *vi -= c * bi;
                }
                coeffs[l] += c;
            }
        }
        let norm = inner(&v, &v).re.max(0.0).sqrt();
        if norm < DEGENERACY_THRESHOLD * original_norm {
            degenerate[k] = true;
            basis.push(vec![Complex64::new(0.0, 0.0); m1]);
        } else {
            let inv = 1.0 / norm;
            for vi in v.iter_mut() {
                *vi *= inv;
            }
            basis.push(v);
        }
        table.push(coeffs);
    }
    Ok(table)
}

fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `sum conj(a_i) b_i` — inner product conjugate-linear in the first slot,
/// accumulated in index order for determinism.
pub(crate) fn dot_conj_first(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        acc += x.conj() * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::generate;
    use proptest::prelude::*;

    fn desc(lags: &[usize], carrier: usize) -> BasisDescriptor {
        BasisDescriptor::new(lags.to_vec(), carrier).unwrap()
    }

    #[test]
    fn dimension_one_columns_are_plain_delays() {
        let u = generate(512, 10e6, 5e6, 1).unwrap();
        let r = build_regressor_set(&u, 3, 1).unwrap();
        assert_eq!(r.n_columns(), 4);
        assert_eq!(r.n_rows(), 512 - 3);
        for (lag, (d, col)) in r.columns().iter().enumerate() {
            assert_eq!(d.subset(), &[lag]);
            assert_eq!(d.carrier_lag(), lag);
            for (i, v) in col.iter().enumerate() {
                assert_eq!(*v, u.samples()[3 + i - lag]);
            }
        }
    }

    #[test]
    fn full_depth_three_set_has_28_columns_14_subsets() {
        let u = generate(512, 10e6, 5e6, 2).unwrap();
        let r = build_regressor_set(&u, 3, 3).unwrap();
        assert_eq!(r.n_columns(), 28);
        assert_eq!(column_count(3, 3), 28);
        let mut subsets: Vec<Vec<usize>> = r
            .descriptors()
            .map(|d| d.subset_ascending())
            .collect();
        subsets.dedup();
        assert_eq!(subsets.len(), 14);
        // Canonical order: the four delays, then pair subsets in
        // lexicographic order with ascending carriers.
        assert_eq!(r.columns()[4].0, desc(&[0, 1], 0));
        assert_eq!(r.columns()[5].0, desc(&[0, 1], 1));
        assert_eq!(r.columns()[6].0, desc(&[0, 2], 0));
        assert_eq!(r.columns()[16].0, desc(&[0, 1, 2], 0));
        assert_eq!(r.columns()[27].0, desc(&[1, 2, 3], 3));
    }

    #[test]
    fn augmented_column_values_match_definition() {
        let u = generate(256, 10e6, 5e6, 3).unwrap();
        let r = build_regressor_set(&u, 2, 2).unwrap();
        // Column for subset {0,2} with carrier 2 is u(n-2)*|u(n)|.
        let (d, col) = r
            .columns()
            .iter()
            .find(|(d, _)| d.subset() == [2, 0] && d.carrier_lag() == 2)
            .unwrap();
        assert_eq!(d.dimension(), 2);
        let us = u.samples();
        for (i, v) in col.iter().enumerate() {
            let n = i + 2;
            let expect = us[n - 2] * us[n].norm();
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn constant_input_gives_constant_augmented_columns() {
        let c = num_complex::Complex64::new(0.6, -0.8); // |c| = 1.0 exactly? no: 0.6^2+0.8^2 = 1
        let samples = vec![c * 2.0; 200];
        let r = build_regressor_from_samples(&samples, 2, 3).unwrap();
        for (d, col) in r.columns() {
            let expect = c * 2.0 * 2.0f64.powi(d.dimension() as i32 - 1); // |2c| = 2
            for v in col {
                assert!((v - expect).norm() < 1e-12 * expect.norm());
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let u = generate(128, 10e6, 5e6, 1).unwrap();
        assert!(build_regressor_set(&u, 3, 0).is_err());
        assert!(build_regressor_set(&u, 3, 5).is_err());
        // Record shorter than 10*(M+1).
        let short = generate(64, 10e6, 5e6, 1).unwrap();
        assert!(build_regressor_set(&short, 6, 1).is_err());
        assert!(BasisDescriptor::new(vec![0, 0], 0).is_err());
        assert!(BasisDescriptor::new(vec![0, 1], 2).is_err());
    }

    #[test]
    fn gram_schmidt_orthogonality_and_projection_value() {
        let u = generate(4096, 200e6, 30e6, 5).unwrap();
        let r = build_regressor_set(&u, 3, 3).unwrap();
        let b = gram_schmidt(&r).unwrap();
        assert!(b.degenerate_flags().iter().all(|d| !d));

        // Max normalized off-diagonal inner product.
        let cols: Vec<&Vec<Complex64>> = b.columns().iter().map(|(_, c)| c).collect();
        let mut worst = 0.0f64;
        for i in 0..cols.len() {
            for j in 0..i {
                let ip = dot_conj_first(cols[i], cols[j]).norm();
                worst = worst.max(ip);
            }
        }
        assert!(worst <= 1e-9, "worst off-diagonal {worst:e}");

        // Unit norms.
        for c in &cols {
            assert!((vec_norm(c) - 1.0).abs() < 1e-12);
        }

        // Stored projection for column 1 onto basis 0 matches the direct
        // subtraction coefficient computed independently.
        let u0 = &r.columns()[0].1;
        let u1 = &r.columns()[1].1;
        let q0: Vec<Complex64> = u0.iter().map(|v| v / vec_norm(u0)).collect();
        let direct = dot_conj_first(&q0, u1);
        let stored = b.projections()[1][0];
        assert!(
            (direct - stored).norm() <= 1e-10 * direct.norm(),
            "direct {direct}, stored {stored}"
        );

        // First column is a positive real multiple of the original.
        assert!(b.norms()[0] > 0.0);
        for (orig, q) in u0.iter().zip(cols[0]) {
            assert!((orig - q * b.norms()[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_inputs_pass_through() {
        // Two columns with disjoint supports are exactly orthogonal.
        let n = 64;
        let mut c0 = vec![Complex64::new(0.0, 0.0); n];
        let mut c1 = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            if i % 2 == 0 {
                c0[i] = Complex64::new(1.0 + i as f64, 0.5);
            } else {
                c1[i] = Complex64::new(0.3, -0.2 * i as f64);
            }
        }
        let r = RegressorMatrix::from_columns(vec![
            (desc(&[0], 0), c0),
            (desc(&[1], 1), c1),
        ])
        .unwrap();
        let b = gram_schmidt(&r).unwrap();
        assert!(b.projections()[1][0].norm() <= 1e-12);
    }

    #[test]
    fn duplicate_column_is_flagged_degenerate() {
        let u = generate(512, 10e6, 5e6, 7).unwrap();
        let col: Vec<Complex64> = u.samples()[..256].to_vec();
        let r = RegressorMatrix::from_columns(vec![
            (desc(&[0], 0), col.clone()),
            (desc(&[1], 1), col.clone()),
        ])
        .unwrap();
        let b = gram_schmidt(&r).unwrap();
        assert!(!b.degenerate_flags()[0]);
        assert!(b.degenerate_flags()[1]);
        assert_eq!(b.norms()[1], 0.0);
        assert!(b.columns()[1].1.iter().all(|v| *v == Complex64::new(0.0, 0.0)));

        // Reverse still reconstructs the duplicate from its projections.
        let rt = reverse(&b).unwrap();
        let err: f64 = rt.columns()[1]
            .1
            .iter()
            .zip(&col)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10 * vec_norm(&col));
    }

    #[test]
    fn reverse_round_trips_full_set() {
        let u = generate(4096, 200e6, 30e6, 9).unwrap();
        let r = build_regressor_set(&u, 3, 3).unwrap();
        let b = gram_schmidt(&r).unwrap();
        let rt = reverse(&b).unwrap();
        for ((_, orig), (_, rec)) in r.columns().iter().zip(rt.columns()) {
            let scale = vec_norm(orig);
            let err: f64 = orig
                .iter()
                .zip(rec)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-10 * scale, "column error {:e}", err / scale);
        }
    }

    #[test]
    fn reverse_single_column_restores_scale() {
        let u = generate(256, 10e6, 5e6, 10).unwrap();
        let r = build_regressor_set(&u, 0, 1).unwrap();
        let b = gram_schmidt(&r).unwrap();
        let rt = reverse(&b).unwrap();
        for (a, c) in r.columns()[0].1.iter().zip(&rt.columns()[0].1) {
            assert!((a - c).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_projection_table_reproduces_training_basis() {
        let u = generate(2048, 200e6, 30e6, 12).unwrap();
        let r = build_regressor_set(&u, 2, 2).unwrap();
        let b = gram_schmidt(&r).unwrap();
        let replay =
            apply_projection_table(&r, b.projections(), b.norms(), b.degenerate_flags()).unwrap();
        for ((_, q), v) in b.columns().iter().zip(&replay) {
            for (a, c) in q.iter().zip(v) {
                assert!((a - c).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn autocorrelation_projections_white_input() {
        // White input: r_u = delta -> delayed columns already orthogonal.
        let r_u = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let table = projections_from_autocorrelation(&r_u, 3).unwrap();
        for row in &table {
            for c in row {
                assert!(c.norm() <= 1e-12);
            }
        }
        // M = 0: single column, empty off-diagonal table.
        let t0 = projections_from_autocorrelation(&r_u[..1], 0).unwrap();
        assert_eq!(t0.len(), 1);
        assert!(t0[0].is_empty());
    }

    #[test]
    fn autocorrelation_projections_match_empirical_for_sinc_lags() {
        // Rectangular PSD of relative width bw/fs has sinc-shaped lags. The
        // record must be long enough that finite-sample fluctuation
        // (~1/sqrt(effective samples)) sits well inside the 5% band.
        let fs = 400e6;
        let bw = 120e6;
        let n = 1_000_000;
        let m_depth = 3;
        let frac = bw / fs;
        let r_u: Vec<Complex64> = (0..=m_depth)
            .map(|d| {
                let x = std::f64::consts::PI * frac * d as f64;
                let v = if d == 0 { 1.0 } else { x.sin() / x };
                Complex64::new(v, 0.0)
            })
            .collect();
        let theory = projections_from_autocorrelation(&r_u, m_depth).unwrap();

        let u = generate(n, fs, bw, 17).unwrap();
        let r = build_regressor_set(&u, m_depth, 1).unwrap();
        let b = gram_schmidt(&r).unwrap();
        let scale = (r.n_rows() as f64).sqrt();
        for k in 0..=m_depth {
            for l in 0..k {
                let empirical = b.projections()[k][l] / scale;
                let t = theory[k][l];
                let denom = t.norm().max(0.1);
                assert!(
                    (empirical - t).norm() <= 5e-2 * denom,
                    "P[{k}][{l}] theory {t}, empirical {empirical}"
                );
            }
        }
    }

    #[test]
    fn autocorrelation_input_validation() {
        let bad0 = vec![Complex64::new(-1.0, 0.0)];
        assert!(projections_from_autocorrelation(&bad0, 0).is_err());
        let short = vec![Complex64::new(1.0, 0.0)];
        assert!(projections_from_autocorrelation(&short, 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn gs_round_trip_property(seed in 0u64..1000, m in 0usize..4) {
            let p_max = (m + 1).min(2);
            let u = generate(1024, 100e6, 40e6, seed).unwrap();
            let r = build_regressor_set(&u, m, p_max).unwrap();
            let b = gram_schmidt(&r).unwrap();

            // Orthogonality.
            let cols: Vec<&Vec<Complex64>> = b.columns().iter().map(|(_, c)| c).collect();
            for i in 0..cols.len() {
                for j in 0..i {
                    prop_assert!(dot_conj_first(cols[i], cols[j]).norm() <= 1e-9);
                }
            }

            // Round trip.
            let rt = reverse(&b).unwrap();
            for ((_, orig), (_, rec)) in r.columns().iter().zip(rt.columns()) {
                let scale = vec_norm(orig).max(1e-30);
                let err: f64 = orig.iter().zip(rec).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
                prop_assert!(err <= 1e-10 * scale);
            }
        }
    }
}
