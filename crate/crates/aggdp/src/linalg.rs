//! Small dense linear solves.
//!
//! The systems in this crate are tiny (aggregate dimension by aggregate
//! dimension), so a plain Gaussian elimination with partial pivoting is all
//! that is needed. A pivot whose magnitude falls below [`PIVOT_TOL`] is
//! treated as singular.

use crate::error::{Error, Result};

/// Pivot magnitude below which a system is reported singular.
pub const PIVOT_TOL: f64 = 1e-10;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// `a` is row-major and consumed along with `b`.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "linear system shape mismatch: matrix {}x?, rhs {}",
            a.len(),
            n
        )));
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        let pivot = a[pivot_row][col];
        if !pivot.is_finite() || pivot.abs() < PIVOT_TOL {
            return Err(Error::Singular(format!(
                "pivot {:.3e} below threshold {:.0e} at column {}",
                pivot, PIVOT_TOL, col
            )));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Weighted least squares `min_theta sum_m w_m (x_m' theta - y_m)^2` via the
/// normal equations. When the plain system is singular the solve is retried
/// with `ridge` added to the diagonal; the returned flag reports whether that
/// fallback was used.
pub fn lstsq(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: Option<&[f64]>,
    ridge: f64,
) -> Result<(Vec<f64>, bool)> {
    if rows.len() != targets.len() || rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "least squares shape mismatch: {} rows, {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument(
            "least squares rows have inconsistent widths".into(),
        ));
    }
    let mut gram = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for (m, row) in rows.iter().enumerate() {
        let w = weights.map_or(1.0, |ws| ws[m]);
        for a in 0..dim {
            let wa = w * row[a];
            rhs[a] += wa * targets[m];
            for b in a..dim {
                gram[a][b] += wa * row[b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
    }
    match solve_dense(gram.clone(), rhs.clone()) {
        Ok(theta) => Ok((theta, false)),
        Err(Error::Singular(_)) => {
            let mut ridged = gram;
            for (a, row) in ridged.iter_mut().enumerate() {
                row[a] += ridge;
            }
            let theta = solve_dense(ridged, rhs)?;
            Ok((theta, true))
        }
        Err(e) => Err(e),
    }
}
