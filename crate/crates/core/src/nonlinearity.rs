//! The nonlinearity `g` and the functions derived from it:
//! `G(x) = ∫_x^{base} du / g(u)`, its inverse, `Γ = g ∘ G⁻¹` and `Γ₁ = g' ∘ g⁻¹`.
//!
//! Everything that can underflow is also available in log space. The flat
//! families (`ExpPoly`, `DoubleExp`) underflow `f64` long before the solution
//! of a decaying equation gets interesting, so callers that need precision
//! should use [`NonlinearitySpec::log_g`].

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, quad, QuadOptions};

/// Largest exponent handed to `exp` before we call the result saturated.
const EXP_CAP: f64 = 700.0;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied nonlinearity. All three closures must agree.
#[derive(Clone)]
pub struct CustomG {
    pub g: RealFn,
    pub g_prime: RealFn,
    pub log_g: RealFn,
    /// Radius of monotonicity `δ₁`.
    pub delta1: f64,
}

impl fmt::Debug for CustomG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomG")
            .field("delta1", &self.delta1)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `g(x) = x^β`
    PowerLaw { beta: f64 },
    /// `g(x) = x^β log(1/x)` on `(0, δ]`, continued linearly (C¹) beyond `δ`.
    PowerLog { beta: f64, delta: f64 },
    /// `g(x) = exp(-x^{-α})`
    ExpPoly { alpha: f64 },
    /// `g(x) = exp(-e^{1/x})`
    DoubleExp,
    #[serde(skip)]
    Custom(CustomG),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    #[serde(flatten)]
    pub family: Family,
    /// Upper limit of the `G` integral. Defaults to 1, or to `δ` for `PowerLog`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<f64>,
}

/// Result of [`rv_index_estimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RvIndex {
    pub index: f64,
    /// Root-mean-square residual of the through-origin fit.
    pub residual: f64,
    pub samples: usize,
}

impl NonlinearitySpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            base_point: None,
        }
    }

    pub fn power_law(beta: f64) -> Self {
        Self::new(Family::PowerLaw { beta })
    }

    pub fn power_log(beta: f64, delta: f64) -> Self {
        Self::new(Family::PowerLog { beta, delta })
    }

    pub fn exp_poly(alpha: f64) -> Self {
        Self::new(Family::ExpPoly { alpha })
    }

    pub fn double_exp() -> Self {
        Self::new(Family::DoubleExp)
    }

    pub fn with_base_point(mut self, base: f64) -> Self {
        self.base_point = Some(base);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::PowerLaw { beta } => {
                if !(*beta > 1.0) || !beta.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "power_law requires beta > 1 (got {beta})"
                    )));
                }
            }
            Family::PowerLog { beta, delta } => {
                if !(*beta > 1.0) || !beta.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "power_log requires beta > 1 (got {beta})"
                    )));
                }
                if !(*delta > 0.0 && *delta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power_log requires 0 < delta < 1 (got {delta})"
                    )));
                }
                // g' = x^{β-1}(β log(1/x) - 1) must stay positive up to δ.
                if *delta >= (-1.0 / beta).exp() {
                    return Err(Error::InvalidParameter(format!(
                        "power_log requires delta < exp(-1/beta) = {:.6} so that g is increasing (got {delta})",
                        (-1.0 / beta).exp()
                    )));
                }
            }
            Family::ExpPoly { alpha } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "exp_poly requires alpha > 0 (got {alpha})"
                    )));
                }
            }
            Family::DoubleExp => {}
            Family::Custom(c) => {
                if !(c.delta1 > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "custom nonlinearity requires delta1 > 0 (got {})",
                        c.delta1
                    )));
                }
            }
        }
        let base = self.base();
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "base_point must be positive and finite (got {base})"
            )));
        }
        Ok(())
    }

    pub fn base(&self) -> f64 {
        self.base_point.unwrap_or(match self.family {
            Family::PowerLog { delta, .. } => delta,
            _ => 1.0,
        })
    }

    /// Radius `δ₁` of the interval `(0, δ₁)` on which `g` is increasing.
    /// Infinite for the families that increase on the whole half-line.
    pub fn delta1(&self) -> f64 {
        match &self.family {
            Family::PowerLog { delta, .. } => *delta,
            Family::Custom(c) => c.delta1,
            _ => f64::INFINITY,
        }
    }

    /// True when `g` is increasing on the whole half-line (all built-in
    /// families; the `PowerLog` continuation has positive slope).
    pub fn monotone_everywhere(&self) -> bool {
        !matches!(self.family, Family::Custom(_))
    }

    /// Regular-variation index of `g` at zero, when `g` has one.
    pub fn beta(&self) -> Option<f64> {
        match self.family {
            Family::PowerLaw { beta } | Family::PowerLog { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::PowerLaw { .. } => "power_law",
            Family::PowerLog { .. } => "power_log",
            Family::ExpPoly { .. } => "exp_poly",
            Family::DoubleExp => "double_exp",
            Family::Custom(_) => "custom",
        }
    }

    /// `g(δ)` and `g'(δ)` for the linear continuation of `PowerLog`.
    fn power_log_edge(beta: f64, delta: f64) -> (f64, f64) {
        let l = (1.0 / delta).ln();
        (delta.powf(beta) * l, delta.powf(beta - 1.0) * (beta * l - 1.0))
    }

    pub fn g(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::domain("g", format!("x = {x} is negative")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.family {
            Family::PowerLaw { beta } => x.powf(*beta),
            Family::PowerLog { beta, delta } => {
                if x <= *delta {
                    x.powf(*beta) * (1.0 / x).ln()
                } else {
                    let (g0, d0) = Self::power_log_edge(*beta, *delta);
                    g0 + d0 * (x - delta)
                }
            }
            Family::ExpPoly { alpha } => (-x.powf(-alpha)).exp(),
            Family::DoubleExp => (-(1.0 / x).exp()).exp(),
            Family::Custom(c) => (c.g)(x),
        })
    }

    pub fn g_prime(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::domain("g_prime", format!("x = {x} is negative")));
        }
        if x == 0.0 {
            return Ok(match &self.family {
                Family::Custom(c) => (c.g_prime)(0.0),
                _ => 0.0,
            });
        }
        Ok(match &self.family {
            Family::PowerLaw { beta } => beta * x.powf(beta - 1.0),
            Family::PowerLog { beta, delta } => {
                if x <= *delta {
                    x.powf(beta - 1.0) * (beta * (1.0 / x).ln() - 1.0)
                } else {
                    Self::power_log_edge(*beta, *delta).1
                }
            }
            Family::ExpPoly { .. } | Family::DoubleExp => self.log_g_prime(x)?.exp(),
            Family::Custom(c) => (c.g_prime)(x),
        })
    }

    pub fn log_g(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain("log_g", format!("x = {x} is not positive")));
        }
        let v = match &self.family {
            Family::PowerLaw { beta } => beta * x.ln(),
            Family::PowerLog { beta, delta } => {
                if x <= *delta {
                    beta * x.ln() + (1.0 / x).ln().ln()
                } else {
                    self.g(x)?.ln()
                }
            }
            Family::ExpPoly { alpha } => -x.powf(-alpha),
            Family::DoubleExp => -(1.0 / x).exp(),
            Family::Custom(c) => (c.log_g)(x),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Saturated { op: "log_g", x })
        }
    }

    pub fn log_g_prime(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain("log_g_prime", format!("x = {x} is not positive")));
        }
        let v = match &self.family {
            Family::PowerLaw { beta } => beta.ln() + (beta - 1.0) * x.ln(),
            Family::PowerLog { .. } => self.g_prime(x)?.ln(),
            Family::ExpPoly { alpha } => alpha.ln() - (alpha + 1.0) * x.ln() - x.powf(-alpha),
            Family::DoubleExp => {
                let e = (1.0 / x).exp();
                -2.0 * x.ln() + 1.0 / x - e
            }
            Family::Custom(c) => (c.g_prime)(x).ln(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Saturated { op: "log_g_prime", x })
        }
    }

    /// `log g(e^w)`, valid far below the smallest positive double for the
    /// closed-form families.
    pub fn log_g_at_log(&self, w: f64) -> Result<f64> {
        match &self.family {
            Family::PowerLaw { beta } => Ok(beta * w),
            Family::PowerLog { beta, delta } if w <= delta.ln() => Ok(beta * w + (-w).ln()),
            Family::ExpPoly { alpha } => {
                let v = -(-alpha * w).exp();
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Saturated {
                        op: "log_g",
                        x: w.exp(),
                    })
                }
            }
            _ => self.log_g(w.exp()),
        }
    }

    /// `G(x) = ∫_x^{base} du/g(u)`. Signed, so `x > base` gives a negative value.
    pub fn big_g(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::domain(
                "G",
                format!("x = {x}: G diverges as x -> 0+ and is undefined below"),
            ));
        }
        let base = self.base();
        if let Family::PowerLaw { beta } = self.family {
            let p = 1.0 - beta;
            return Ok((x.powf(p) - base.powf(p)) / (beta - 1.0));
        }
        self.big_g_between(x, base)
    }

    /// `∫_x^y du/g(u)` by quadrature in `v = -ln u`.
    pub fn big_g_between(&self, x: f64, y: f64) -> Result<f64> {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::domain("G", format!("limits {x}, {y} must be positive")));
        }
        if x == y {
            return Ok(0.0);
        }
        if let Family::PowerLaw { beta } = self.family {
            let p = 1.0 - beta;
            return Ok((x.powf(p) - y.powf(p)) / (beta - 1.0));
        }
        let (lo, hi, sign) = if x < y { (x, y, 1.0) } else { (y, x, -1.0) };
        let v_lo = -hi.ln();
        let v_hi = -lo.ln();
        let peak = v_hi - self.log_g(lo)?;
        if peak > EXP_CAP {
            return Err(Error::Saturated { op: "G", x: lo });
        }
        let err = RefCell::new(None);
        let integrand = |v: f64| match self.log_g((-v).exp()) {
            Ok(lg) => (-v - lg).min(EXP_CAP).exp(),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let breaks = quad::unit_breaks(v_lo, v_hi, 4000);
        let opts = QuadOptions {
            rel_tol: 1e-12,
            abs_tol: 0.0,
            max_intervals: 20_000,
        };
        let r = numeric::integrate_with_breaks(integrand, v_lo, v_hi, &breaks, opts)?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(sign * r.value)
    }

    /// `G⁻¹(y)` for `y ≥ 0`.
    pub fn big_g_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::domain("G_inverse", format!("y = {y} is negative")));
        }
        let base = self.base();
        if y == 0.0 {
            return Ok(base);
        }
        if let Family::PowerLaw { beta } = self.family {
            let s = y * (beta - 1.0) + base.powf(1.0 - beta);
            return Ok(s.powf(-1.0 / (beta - 1.0)));
        }
        // Solve log G(e^w) = log y for w < ln(base); the left side is
        // decreasing and far less convex than G itself for the flat families.
        let hi = base.ln();
        let ly = y.ln();
        let first_err: RefCell<Option<Error>> = RefCell::new(None);
        let big_g_log = |w: f64| -> f64 {
            match self.big_g(w.exp()) {
                Ok(v) if v > 0.0 => v.ln(),
                Ok(_) => f64::NEG_INFINITY,
                Err(Error::Saturated { .. }) => f64::INFINITY,
                Err(e) => {
                    first_err.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let mut step = 1.0;
        let mut lo = hi - step;
        loop {
            let v = big_g_log(lo) - ly;
            if let Some(e) = first_err.borrow_mut().take() {
                return Err(e);
            }
            if v > 0.0 {
                break;
            }
            step *= 2.0;
            lo = hi - step;
            if step > 1e6 {
                return Err(Error::RootFinding(format!("G_inverse: no bracket for y = {y:e}")));
            }
        }
        let fdf = |w: f64| -> (f64, f64) {
            let lgg = big_g_log(w);
            // d/dw log G(e^w) = −e^w / (g(e^w) G(e^w))
            let d = match self.log_g(w.exp()) {
                Ok(lg) => -(w - lg - lgg).min(EXP_CAP).exp(),
                Err(_) => f64::NEG_INFINITY,
            };
            (lgg - ly, d)
        };
        let mut w = numeric::safeguarded_newton(fdf, lo, hi, 1e-14)?;
        // Near the base point log G is steep in w, so the bracket width no
        // longer bounds the relative error of G; polish on G itself.
        for _ in 0..3 {
            let (Ok(gv), Ok(lg)) = (self.big_g(w.exp()), self.log_g(w.exp())) else {
                break;
            };
            let next = w + (gv - y) / (w - lg).exp();
            match self.big_g(next.exp()) {
                Ok(gn) if (gn - y).abs() < (gv - y).abs() => w = next,
                _ => break,
            }
        }
        if let Some(e) = first_err.into_inner() {
            return Err(e);
        }
        Ok(w.exp())
    }

    /// `log Γ(y) = log g(G⁻¹(y))`.
    pub fn log_gamma(&self, y: f64) -> Result<f64> {
        let x = self.big_g_inverse(y)?;
        self.log_g(x)
    }

    /// `Γ(y) = g(G⁻¹(y))`, computed through `log g` so it does not underflow
    /// before the final exponentiation.
    pub fn gamma(&self, y: f64) -> Result<f64> {
        Ok(self.log_gamma(y)?.exp())
    }

    /// Supremum of `g` on `(0, δ₁)`.
    pub fn g_sup(&self) -> f64 {
        match &self.family {
            Family::PowerLaw { .. } => f64::INFINITY,
            Family::ExpPoly { .. } => 1.0,
            Family::DoubleExp => (-1f64).exp(),
            _ => self.g(self.delta1()).unwrap_or(f64::NAN),
        }
    }

    /// `g⁻¹(e^{ly})`, i.e. the inverse of `g` addressed by `log y`.
    pub fn g_inverse_log(&self, ly: f64) -> Result<f64> {
        if ly.is_nan() || ly >= self.g_sup().ln() {
            return Err(Error::domain(
                "g_inverse",
                format!("log y = {ly} outside the range of g on (0, delta1)"),
            ));
        }
        if ly == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        match &self.family {
            Family::PowerLaw { beta } => Ok((ly / beta).exp()),
            Family::ExpPoly { alpha } => Ok((-ly).powf(-1.0 / alpha)),
            Family::DoubleExp => Ok(1.0 / (-ly).ln()),
            _ => {
                let hi = self.delta1().ln();
                let f = |w: f64| self.log_g_at_log(w).map(|v| v - ly).unwrap_or(f64::NEG_INFINITY);
                let mut lo = hi - 1.0;
                let mut step = 1.0;
                while f(lo) >= 0.0 {
                    step *= 2.0;
                    lo = hi - step;
                    if step > 1e6 {
                        return Err(Error::RootFinding(format!("g_inverse: no bracket for log y = {ly}")));
                    }
                }
                let fdf = |w: f64| {
                    let x = w.exp();
                    // d/dw log g(e^w) = x g'(x)/g(x)
                    let d = match (self.log_g_prime(x), self.log_g(x)) {
                        (Ok(a), Ok(b)) => (w + a - b).exp(),
                        _ => f64::NAN,
                    };
                    (f(w), d)
                };
                let w = numeric::safeguarded_newton(fdf, lo, hi, 1e-14)?;
                Ok(w.exp())
            }
        }
    }

    pub fn g_inverse(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::domain("g_inverse", format!("y = {y} is negative")));
        }
        self.g_inverse_log(y.ln())
    }

    /// `Γ₁(y) = g'(g⁻¹(y))` for `0 < y < g(δ₁)`.
    pub fn gamma1(&self, y: f64) -> Result<f64> {
        if !(y > 0.0 && y < self.g_sup()) {
            return Err(Error::domain(
                "gamma1",
                format!("y = {y:e} outside (0, g(delta1)) = (0, {:e})", self.g_sup()),
            ));
        }
        let x = self.g_inverse_log(y.ln())?;
        Ok(self.log_g_prime(x)?.exp())
    }
}

fn through_origin_fit(points: &[(f64, f64)]) -> RvIndex {
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let index = sxy / sxx;
    let ss: f64 = points.iter().map(|(x, y)| (y - index * x).powi(2)).sum();
    RvIndex {
        index,
        residual: (ss / points.len() as f64).sqrt(),
        samples: points.len(),
    }
}

const RV_LAMBDAS: [f64; 3] = [2.0, 4.0, 8.0];

/// Estimates the regular-variation index of `f` at zero (or at infinity) by a
/// least-squares fit of `log f(λx)/f(x)` against `log λ`, λ ∈ {2, 4, 8}, over
/// `decades` geometric sample points starting at 1e-60 (or 1e60).
pub fn rv_index_estimate<F: Fn(f64) -> f64>(f: F, at_zero: bool, decades: usize) -> Result<RvIndex> {
    let anchor_log = if at_zero { -60.0 } else { 60.0 } * std::f64::consts::LN_10;
    rv_index_estimate_log(
        |w| {
            let v = f(w.exp());
            if v > 0.0 {
                v.ln()
            } else {
                f64::NAN
            }
        },
        at_zero,
        decades,
        anchor_log,
    )
}

/// Same as [`rv_index_estimate`] but for a function given in log–log form,
/// `w ↦ log f(e^w)`, sampled from `anchor_log` moving towards the finite part
/// of the axis. This reaches arguments far outside the double range, which is
/// where slowly varying factors finally stop biasing the estimate.
pub fn rv_index_estimate_log<F: Fn(f64) -> f64>(
    log_f: F,
    at_zero: bool,
    decades: usize,
    anchor_log: f64,
) -> Result<RvIndex> {
    if decades == 0 {
        return Err(Error::InvalidParameter(
            "rv_index_estimate needs at least one decade".into(),
        ));
    }
    let dir = if at_zero { 1.0 } else { -1.0 };
    let mut points = Vec::with_capacity(decades * RV_LAMBDAS.len());
    for k in 0..decades {
        let w = anchor_log + dir * k as f64 * std::f64::consts::LN_10;
        let base = log_f(w);
        for lam in RV_LAMBDAS {
            // Move λ towards the limit point so every sample stays on the
            // tested side of the anchor.
            let shifted = log_f(w - dir * lam.ln());
            if !base.is_finite() || !shifted.is_finite() {
                return Err(Error::domain(
                    "rv_index_estimate",
                    format!("non-positive or non-finite sample near log x = {w:.3}"),
                ));
            }
            // f(x/λ)/f(x) ~ λ^{-index} at zero, f(λx)/f(x) ~ λ^{index} at infinity
            points.push((lam.ln(), -dir * (shifted - base)));
        }
    }
    Ok(through_origin_fit(&points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn closed_form_values() {
        assert!(close(NonlinearitySpec::power_law(2.0).g(0.5).unwrap(), 0.25, 1e-15));
        assert!(close(
            NonlinearitySpec::exp_poly(1.0).g(0.5).unwrap(),
            (-2f64).exp(),
            1e-15
        ));
        let pl = NonlinearitySpec::power_log(2.0, 0.5);
        assert!(close(pl.g(0.1).unwrap(), 0.01 * 10f64.ln(), 1e-14));
        assert!(close(pl.g(0.1).unwrap(), 0.023_025_850_929_940_46, 1e-12));
        assert_eq!(pl.g(0.0).unwrap(), 0.0);
        assert!(pl.g(-1.0).is_err());
    }

    #[test]
    fn log_values() {
        assert_eq!(NonlinearitySpec::exp_poly(1.0).log_g(0.01).unwrap(), -100.0);
        let de = NonlinearitySpec::double_exp().log_g(0.02).unwrap();
        assert!(close(de, -(50f64).exp(), 1e-14));
        assert!(close(de, -5.184_705_528_587_072e21, 1e-12));
        assert!(close(
            NonlinearitySpec::power_law(2.0).log_g(0.5).unwrap(),
            -1.386_294_361_119_890_6,
            1e-15
        ));
        assert!(NonlinearitySpec::power_law(2.0).log_g(0.0).is_err());
    }

    #[test]
    fn flat_families_underflow_to_zero() {
        assert_eq!(NonlinearitySpec::double_exp().g(0.02).unwrap(), 0.0);
        assert_eq!(NonlinearitySpec::exp_poly(1.0).g(1e-3).unwrap(), 0.0);
    }

    #[test]
    fn big_g_closed_form() {
        let s = NonlinearitySpec::power_law(2.0);
        assert!(close(s.big_g(0.5).unwrap(), 1.0, 1e-15));
        assert_eq!(s.big_g(1.0).unwrap(), 0.0);
        assert!(close(s.big_g(0.1).unwrap(), 9.0, 1e-14));
        assert!(s.big_g(0.0).is_err());
    }

    #[test]
    fn big_g_quadrature_matches_closed_form() {
        // ExpPoly with α=1: ∫ e^{1/u} du has no elementary form, but in
        // v = 1/u it becomes ∫ e^v / v² dv; compare against a dense Simpson rule.
        let s = NonlinearitySpec::exp_poly(1.0);
        let x: f64 = 0.05;
        let n = 2_000_000;
        let (a, b) = (1.0, 1.0 / x);
        let h = (b - a) / n as f64;
        let f = |v: f64| v.exp() / (v * v);
        let mut sum = f(a) + f(b);
        for k in 1..n {
            sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let reference = sum * h / 3.0;
        assert!(close(s.big_g(x).unwrap(), reference, 1e-9));
    }

    #[test]
    fn power_log_g_against_frozen_reference() {
        // High-precision reference, computed independently with 50-digit quadrature.
        let s = NonlinearitySpec::power_log(2.0, 0.5);
        let v = s.big_g(1e-4).unwrap();
        assert!(close(v, 1_245.092_052_119_27, 1e-10), "{v}");
    }

    #[test]
    fn inverse_closed_form() {
        let s = NonlinearitySpec::power_law(2.0);
        assert!(close(s.big_g_inverse(1.0).unwrap(), 0.5, 1e-15));
        assert_eq!(s.big_g_inverse(0.0).unwrap(), 1.0);
        assert!(s.big_g_inverse(-1.0).is_err());
        for fam in [
            NonlinearitySpec::exp_poly(1.0),
            NonlinearitySpec::power_log(2.0, 0.5),
            NonlinearitySpec::double_exp(),
        ] {
            assert_eq!(fam.big_g_inverse(0.0).unwrap(), fam.base());
        }
    }

    #[test]
    fn inverse_round_trip_all_families() {
        for fam in [
            NonlinearitySpec::power_law(1.5),
            NonlinearitySpec::power_log(2.0, 0.5),
            NonlinearitySpec::exp_poly(1.0),
            NonlinearitySpec::exp_poly(0.5),
            NonlinearitySpec::double_exp(),
        ] {
            for k in -6..=6 {
                let y = 10f64.powi(k);
                let x = fam.big_g_inverse(y).unwrap();
                let back = fam.big_g(x).unwrap();
                assert!(close(back, y, 1e-8), "{} y={y} back={back}", fam.name());
            }
        }
    }

    #[test]
    fn gamma_values() {
        let s = NonlinearitySpec::power_law(2.0);
        assert!(close(s.gamma(1.0).unwrap(), 0.25, 1e-14));
        let r = s.gamma(2e6).unwrap() / s.gamma(1e6).unwrap();
        assert!(close(r, 0.25, 1e-2));
        assert!(close(s.gamma1(0.25).unwrap(), 1.0, 1e-14));
    }

    #[test]
    fn gamma1_domain() {
        let s = NonlinearitySpec::exp_poly(1.0);
        assert!(s.gamma1(0.0).is_err());
        assert!(s.gamma1(1.0).is_err());
        let pl = NonlinearitySpec::power_log(2.0, 0.5);
        let top = pl.g(0.5).unwrap();
        assert!(pl.gamma1(top * 1.01).is_err());
        let y = 1e-6;
        let x = pl.g_inverse(y).unwrap();
        assert!(close(pl.g(x).unwrap(), y, 1e-12));
    }

    #[test]
    fn derivative_consistency() {
        for fam in [
            NonlinearitySpec::power_law(2.5),
            NonlinearitySpec::power_log(2.0, 0.5),
            NonlinearitySpec::exp_poly(1.0),
            NonlinearitySpec::double_exp(),
        ] {
            let top = fam.delta1().min(1.0);
            for x in numeric::geomspace(top / 100.0, top * 0.999, 25) {
                // steep enough that the O(h²) term matters for double_exp
                let h = x * 1e-7;
                let fd = (fam.g(x + h).unwrap() - fam.g(x - h).unwrap()) / (2.0 * h);
                let d = fam.g_prime(x).unwrap();
                assert!(close(fd, d, 1e-5), "{} x={x} fd={fd} d={d}", fam.name());
            }
        }
    }

    #[test]
    fn log_consistency() {
        for fam in [
            NonlinearitySpec::power_law(2.0),
            NonlinearitySpec::power_log(3.0, 0.2),
            NonlinearitySpec::exp_poly(2.0),
            NonlinearitySpec::double_exp(),
        ] {
            for x in numeric::geomspace(1e-3, 0.9 * fam.delta1().min(1.0), 40) {
                let g = fam.g(x).unwrap();
                if g > 1e-300 {
                    assert!((fam.log_g(x).unwrap() - g.ln()).abs() <= 1e-10, "{} {x}", fam.name());
                }
            }
        }
    }

    #[test]
    fn power_log_extension_is_c1() {
        let s = NonlinearitySpec::power_log(2.0, 0.5);
        let (a, b) = (s.g(0.5 - 1e-9).unwrap(), s.g(0.5 + 1e-9).unwrap());
        assert!((a - b).abs() < 1e-8);
        let (da, db) = (s.g_prime(0.5 - 1e-9).unwrap(), s.g_prime(0.5 + 1e-9).unwrap());
        assert!((da - db).abs() < 1e-7);
    }

    #[test]
    fn validation() {
        assert!(NonlinearitySpec::power_law(1.0).validate().is_err());
        assert!(NonlinearitySpec::power_log(2.0, 0.7).validate().is_err());
        assert!(NonlinearitySpec::power_log(2.0, 0.5).validate().is_ok());
        assert!(NonlinearitySpec::exp_poly(0.0).validate().is_err());
        assert!(NonlinearitySpec::power_law(2.0)
            .with_base_point(-1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn rv_index_examples() {
        let r = rv_index_estimate(|x| x.powi(3), true, 6).unwrap();
        assert!((r.index - 3.0).abs() < 1e-6);
        let r = rv_index_estimate(|x| x * x * (1.0 / x).ln(), true, 6).unwrap();
        assert!((r.index - 2.0).abs() < 1e-2, "{r:?}");
        let s = NonlinearitySpec::power_law(2.0);
        let r = rv_index_estimate(|y| s.gamma(y).unwrap(), false, 6).unwrap();
        assert!((r.index + 2.0).abs() < 1e-2, "{r:?}");
    }

    #[test]
    fn rv_index_rejects_nonpositive() {
        assert!(rv_index_estimate(|_| 0.0, true, 6).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let s = NonlinearitySpec::power_log(2.0, 0.4);
        let t = toml::to_string(&s).unwrap();
        let back: NonlinearitySpec = toml::from_str(&t).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), t);
        let d: NonlinearitySpec = toml::from_str("family = \"double_exp\"").unwrap();
        assert!(matches!(d.family, Family::DoubleExp));
    }
}
