//! Shared numerical kernels.

pub mod quad;
pub mod roots;

pub use quad::{integrate, integrate_with_breaks, QuadOptions, QuadResult};
pub use roots::{bisect, expand_bracket_log, golden_min, safeguarded_newton};

/// Geometric grid of `n` points from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                (llo + (lhi - llo) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
