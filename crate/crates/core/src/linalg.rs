//! Small dense-matrix helpers shared across the crate: a Cholesky solver
//! for symmetric positive definite systems and a scalar Pearson correlation.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Relative standard-deviation floor below which a sequence counts as
/// constant for correlation purposes.
pub(crate) const DEGENERATE_STD_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky_factor(s: &Array2<f64>) -> Result<Array2<f64>> {
    let n = s.nrows();
    debug_assert_eq!(n, s.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::Numerical(format!(
                        "matrix is not positive definite (pivot {sum:e} at row {i})"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves S X = B for symmetric positive definite S and a multi-column B.
pub(crate) fn solve_spd(s: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = s.nrows();
    if s.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(format!(
            "solve_spd shapes: {}x{} vs {}x{}",
            s.nrows(),
            s.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let l = cholesky_factor(s)?;
    Ok(cholesky_solve(&l, b))
}

/// Back-substitution with a precomputed lower Cholesky factor: solves
/// (L L^T) X = B. Lets one factorization serve many right-hand sides.
pub(crate) fn cholesky_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let k = b.ncols();
    let mut x = b.clone();
    // forward: L y = b
    for c in 0..k {
        for i in 0..n {
            let mut sum = x[[i, c]];
            for j in 0..i {
                sum -= l[[i, j]] * x[[j, c]];
            }
            x[[i, c]] = sum / l[[i, i]];
        }
    }
    // backward: L^T x = y
    for c in 0..k {
        for i in (0..n).rev() {
            let mut sum = x[[i, c]];
            for j in (i + 1)..n {
                sum -= l[[j, i]] * x[[j, c]];
            }
            x[[i, c]] = sum / l[[i, i]];
        }
    }
    x
}

/// Sample Pearson correlation of two equal-length slices, or `None` when
/// either side is (numerically) constant or fewer than two points are given.
/// The result is clamped into [-1, 1].
pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    debug_assert_eq!(n, y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let da = a - mx;
        let db = b - my;
        sxx += da * da;
        syy += db * db;
        sxy += da * db;
    }
    if is_degenerate(sxx, mx, n) || is_degenerate(syy, my, n) {
        return None;
    }
    // single square root keeps exact cases (y = a*x + b) exactly at +/-1
    let denom = (sxx * syy).sqrt();
    let r = if denom.is_finite() { sxy / denom } else { (sxy / sxx.sqrt()) / syy.sqrt() };
    Some(r.clamp(-1.0, 1.0))
}

/// Whether a sequence with the given centered sum of squares counts as
/// constant (relative to its mean's magnitude).
pub(crate) fn is_degenerate(sum_sq: f64, mean: f64, n: usize) -> bool {
    let std = (sum_sq / (n as f64 - 1.0)).sqrt();
    std <= DEGENERATE_STD_TOL * (1.0 + mean.abs())
}
