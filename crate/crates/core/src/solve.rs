//! Scalar root finding on a sign-changing bracket.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no sign change on [{lo}, {hi}] (f = {f_lo}, {f_hi})")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("function is not finite at {0}")]
    NonFinite(f64),
}

/// Plain bisection until the bracket is narrower than `abs_tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, abs_tol: f64) -> Result<f64, SolveError> {
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    check_bracket(lo, hi, f_lo, f_hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    while hi - lo > abs_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if !f_mid.is_finite() {
            return Err(SolveError::NonFinite(mid));
        }
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton's method kept inside a shrinking bracket; any step that leaves the
/// bracket (or fails to halve it over two iterations) becomes a bisection step.
pub fn safeguarded_newton<F, D>(f: F, df: D, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<f64, SolveError>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    check_bracket(lo, hi, f_lo, f_hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    let mut x = 0.5 * (lo + hi);
    let mut last_width = hi - lo;
    for _ in 0..200 {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(SolveError::NonFinite(x));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx < 0.0) == (f_lo < 0.0) {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
        }
        let width = hi - lo;
        let slope = df(x);
        let newton = x - fx / slope;
        let converging = width <= 0.5 * last_width;
        let next = if slope.is_finite() && slope != 0.0 && newton > lo && newton < hi && converging {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_width = width;
        let step = (next - x).abs();
        x = next;
        if step <= rel_tol * x.abs().max(f64::MIN_POSITIVE) || hi - lo <= rel_tol * x.abs() {
            return Ok(x);
        }
    }
    Ok(x)
}

fn check_bracket(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<(), SolveError> {
    if !f_lo.is_finite() {
        return Err(SolveError::NonFinite(lo));
    }
    if !f_hi.is_finite() {
        return Err(SolveError::NonFinite(hi));
    }
    if (f_lo < 0.0) == (f_hi < 0.0) && f_lo != 0.0 && f_hi != 0.0 {
        return Err(SolveError::NotBracketed { lo, hi, f_lo, f_hi });
    }
    Ok(())
}
