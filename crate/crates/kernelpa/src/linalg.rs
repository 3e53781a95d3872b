//! Minimal dense complex linear algebra for the low-order least-squares fits
//! used in parametric identification. Systems here are tiny (k <= 8), so a
//! partial-pivot Gaussian elimination is plenty.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves `A x = b` in place for a small square complex system using Gaussian
/// elimination with partial pivoting. `a` is row-major, consumed as scratch.
pub(crate) fn solve_in_place(a: &mut [Vec<Complex64>], b: &mut Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.len();
    if n == 0 || b.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter(
            "linear system dimensions are inconsistent".into(),
        ));
    }

    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.norm()))
        .fold(0.0, f64::max);
    if scale <= 0.0 {
        return Err(Error::Estimation("linear system is all-zero".into()));
    }

    for col in 0..n {
        // Partial pivot on magnitude.
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mag <= 1e-13 * scale {
            return Err(Error::Estimation(
                "singular system in least-squares solve".into(),
            ));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);

        let pivot = a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col..n {
                let sub = factor * a[col][c];
                a[r][c] -= sub;
            }
            let sub = factor * b[col];
            b[r] -= sub;
        }
    }

    // Back substitution.
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Complex least squares: finds `x` minimizing `sum_n |y_n - sum_k x_k c_k[n]|^2`
/// via the normal equations. `columns` are the regression columns `c_k`.
pub(crate) fn least_squares(columns: &[Vec<Complex64>], y: &[Complex64]) -> Result<Vec<Complex64>> {
    let k = columns.len();
    if k == 0 {
        return Err(Error::InvalidParameter("no regression columns".into()));
    }
    let n = y.len();
    if n < k || columns.iter().any(|c| c.len() != n) {
        return Err(Error::LengthMismatch(format!(
            "least squares: {n} rows for {k} columns"
        )));
    }

    // Gram matrix G[i][j] = <c_i, c_j> (conjugate-linear in the first slot)
    // and right-hand side r[i] = <c_i, y>.
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    let mut rhs = vec![Complex64::new(0.0, 0.0); k];
    for i in 0..k {
        for j in i..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for n_idx in 0..n {
                acc += columns[i][n_idx].conj() * columns[j][n_idx];
            }
            gram[i][j] = acc;
            if i != j {
                gram[j][i] = acc.conj();
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for n_idx in 0..n {
            acc += columns[i][n_idx].conj() * y[n_idx];
        }
        rhs[i] = acc;
    }

    // Equilibrate to unit column norms: power-style bases can span many
    // orders of magnitude, which would otherwise dominate the pivot-based
    // singularity test. Solve in the scaled variables, then undo.
    let inv_norms: Vec<f64> = (0..k)
        .map(|i| {
            let nrm = gram[i][i].re.sqrt();
            if nrm > 0.0 {
                1.0 / nrm
            } else {
                0.0
            }
        })
        .collect();
    if inv_norms.iter().any(|v| *v == 0.0) {
        return Err(Error::Estimation(
            "singular system in least-squares solve".into(),
        ));
    }
    for i in 0..k {
        for j in 0..k {
            gram[i][j] *= inv_norms[i] * inv_norms[j];
        }
        rhs[i] *= inv_norms[i];
    }

    let scaled = solve_in_place(&mut gram, &mut rhs)?;
    Ok(scaled
        .into_iter()
        .zip(&inv_norms)
        .map(|(x, s)| x * *s)
        .collect())
}
