//! Bracketed 1-D root finding: bisection to shrink the bracket, then
//! safeguarded secant steps to polish.

use crate::error::{Error, Result};

/// Stopping rule for [`find_root`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootTolerance {
    /// Bracket width (or last step) below which the abscissa is converged.
    pub x_tol: f64,
    /// Residual magnitude that must also be reached.
    pub f_tol: f64,
    pub max_iter: usize,
}

/// Bisection runs until the bracket is this fraction of its initial width.
const BISECT_FRACTION: f64 = 1e-3;

/// Finds a root of `f` in `[a, b]`, which must bracket a sign change.
///
/// Stops once the residual is below `f_tol` and the bracket (or the last
/// secant step) is below `x_tol`. If the bracket collapses to `x_tol` first,
/// the best endpoint is returned and the caller checks its residual.
pub fn find_root<F>(mut f: F, a: f64, b: f64, tol: RootTolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !(f_lo.is_finite() && f_hi.is_finite()) {
        return Err(Error::NoSolution(format!(
            "no sign change on [{lo}, {hi}] (f = {f_lo:e}, {f_hi:e})"
        )));
    }

    let switch_width = (hi - lo) * BISECT_FRACTION;
    let mut iter = 0;
    while hi - lo > switch_width.max(tol.x_tol) && iter < tol.max_iter {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        iter += 1;
    }

    // Secant from the two bracket ends, falling back to bisection whenever
    // the step leaves the bracket.
    let (mut x0, mut f0, mut x1, mut f1) = (lo, f_lo, hi, f_hi);
    while iter < tol.max_iter {
        let mut x = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x > lo && x < hi) || !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        iter += 1;
        let step = (x - x1).abs();
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
        if fx.abs() < tol.f_tol && (step < tol.x_tol || hi - lo < tol.x_tol) {
            return Ok(x);
        }
        if hi - lo < tol.x_tol {
            break;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// Indices `k` such that `values[k]` and `values[k + 1]` are both defined and
/// of opposite sign (or the first of them is exactly zero).
pub fn sign_changes(values: &[Option<f64>]) -> Vec<usize> {
    values
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| match (w[0], w[1]) {
            (Some(a), Some(b)) if a == 0.0 || (a.signum() != b.signum() && b != 0.0) => Some(k),
            _ => None,
        })
        .collect()
}
