//! Bracketed, safeguarded Newton iteration for scalar roots on (0, ∞).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolution {
    pub root: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Finds a root of `f` on (0, ∞), where `f` returns (value, derivative).
///
/// Starts from the bracket [`lo`, `hi`] and widens it geometrically, down to
/// `lo_limit` and up to `hi_limit`, until the end values differ in sign.
/// Newton steps are taken when they stay inside the current bracket and
/// make progress; otherwise the bracket is bisected on the log scale.
#[allow(clippy::too_many_arguments)]
pub fn safeguarded_newton<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    lo_limit: f64,
    hi_limit: f64,
    tol: f64,
    max_iter: usize,
) -> Result<RootSolution>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    if !(lo > 0.0 && lo < hi) || !(lo_limit > 0.0 && lo_limit <= lo && hi <= hi_limit) {
        return Err(Error::Domain(format!(
            "invalid bracket [{lo}, {hi}] within limits [{lo_limit}, {hi_limit}]"
        )));
    }
    let mut flo = f(lo)?.0;
    let mut fhi = f(hi)?.0;
    while flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
        let can_lo = lo > lo_limit;
        let can_hi = hi < hi_limit;
        if !can_lo && !can_hi {
            return Err(Error::SolverFailure(format!(
                "no sign change on [{lo:e}, {hi:e}]: f(lo) = {flo:e}, f(hi) = {fhi:e}"
            )));
        }
        if can_lo {
            lo = (lo / 10.0).max(lo_limit);
            flo = f(lo)?.0;
        }
        if can_hi && flo.signum() == fhi.signum() {
            hi = (hi * 10.0).min(hi_limit);
            fhi = f(hi)?.0;
        }
    }
    if flo == 0.0 {
        return Ok(RootSolution { root: lo, iterations: 0, residual: 0.0 });
    }
    if fhi == 0.0 {
        return Ok(RootSolution { root: hi, iterations: 0, residual: 0.0 });
    }
    // orient so that f(a) < 0 < f(b)
    let (mut a, mut b) = if flo < 0.0 { (lo, hi) } else { (hi, lo) };
    let mut x = (lo * hi).sqrt();
    let (mut fx, mut dfx) = f(x)?;
    let mut last_step = (hi - lo).abs();
    for iter in 1..=max_iter {
        if fx == 0.0 {
            return Ok(RootSolution { root: x, iterations: iter, residual: 0.0 });
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        let newton = x - fx / dfx;
        let step_ok = dfx.is_finite()
            && dfx != 0.0
            && newton > left
            && newton < right
            && (newton - x).abs() < 0.5 * last_step;
        let next = if step_ok { newton } else { (left * right).sqrt() };
        last_step = (next - x).abs();
        x = next;
        let converged = last_step <= tol * x || (right - left) <= tol * x;
        let eval = f(x)?;
        fx = eval.0;
        dfx = eval.1;
        if converged {
            return Ok(RootSolution { root: x, iterations: iter, residual: fx });
        }
    }
    Err(Error::SolverFailure(format!(
        "no convergence in {max_iter} iterations (last iterate {x:e}, residual {fx:e}, bracket [{a:e}, {b:e}])"
    )))
}
