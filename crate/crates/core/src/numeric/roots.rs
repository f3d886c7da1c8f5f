//! Scalar root finding and minimisation on brackets.

use crate::error::{Error, Result};

/// Bisection on a sign-changing bracket. Stops when the bracket is narrower
/// than `width` or after 400 halvings.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, width: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:e}, {hi:e}] (f = {flo:e}, {fhi:e})"
        )));
    }
    for _ in 0..400 {
        if (hi - lo).abs() <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton's method kept inside a bracket; any step that leaves the bracket or
/// fails to shrink it fast enough is replaced by bisection.
///
/// `fdf` returns the value and derivative together.
pub fn safeguarded_newton<F: Fn(f64) -> (f64, f64)>(fdf: F, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64> {
    let (flo, _) = fdf(lo);
    let (fhi, _) = fdf(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo:e}, {hi:e}] (f = {flo:e}, {fhi:e})"
        )));
    }
    // Orient so that f(lo) < 0 < f(hi).
    let flip = flo > 0.0;
    let mut x = 0.5 * (lo + hi);
    // Width three iterations ago; Newton creeping from one side is cut off by
    // a forced bisection when the bracket has not halved since then.
    let mut widths = [(hi - lo).abs(); 3];
    for it in 0..1000 {
        let (mut fx, mut dfx) = fdf(x);
        if flip {
            fx = -fx;
            dfx = -dfx;
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let width = (hi - lo).abs();
        if width <= x_tol {
            return Ok(0.5 * (lo + hi));
        }
        let newton = x - fx / dfx;
        let inside = newton.is_finite() && (newton - lo) * (newton - hi) < 0.0;
        let stalled = width > 0.5 * widths[it % 3];
        widths[it % 3] = width;
        let next = if inside && !stalled { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= x_tol * 0.5 {
            return Ok(next);
        }
        x = next;
    }
    Ok(0.5 * (lo + hi))
}

/// Expands `[lo, hi]` geometrically (by `factor` around the geometric mean for
/// positive brackets) until `f` changes sign or `max_iter` expansions are used.
pub fn expand_bracket_log<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    factor: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    debug_assert!(lo > 0.0 && hi > lo && factor > 1.0);
    let mut flo = f(lo);
    let mut fhi = f(hi);
    for _ in 0..max_iter {
        if flo.signum() != fhi.signum() && !flo.is_nan() && !fhi.is_nan() {
            return Ok((lo, hi));
        }
        if flo.abs() < fhi.abs() {
            lo /= factor;
            flo = f(lo);
        } else {
            hi *= factor;
            fhi = f(hi);
        }
    }
    Err(Error::RootFinding(format!(
        "no sign change found after expanding to [{lo:e}, {hi:e}]"
    )))
}

/// Golden-section search for a local minimum of `f` on `[lo, hi]`.
/// Returns `(argmin, min)`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > x_tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        if c == d {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
