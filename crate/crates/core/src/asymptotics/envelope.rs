//! Explicit lower and upper solutions
//!
//! ```text
//! g(x_L(t)) = x₁ exp(−C₁ I(t)),   g(x_U(t)) = x₂ exp(−C₂ I(t))
//! ```
//!
//! For `y` of this form, `y' + a g(y) − b g(y(t−τ)) = g(y)·(a − b e^{C W(t)} − C/(σ(t) g'(y)))`
//! with `W` the window integral. `C₁ = log(a/b)/(1−ε)` makes the bracket negative
//! once `W ≥ 1−ε`; `C₂ = c₂(ε)` makes it positive once `W ≤ 1+ε` and
//! `σ g'(x_U) > 1/ε`. The matching times below are where those hold from
//! then on; `x₁`, `x₂` are fitted so the envelopes bracket `x` before them.

use serde::Serialize;

use super::lambda::c2_root;
use crate::error::{Error, Result};
use crate::integrator::{ProblemSpec, Trajectory};
use crate::nonlinearity::NonlinearitySpec;
use crate::numeric;
use crate::sigma::SigmaSpec;

/// Relative safety factor applied to fitted `x₁` (down) and `x₂` (up).
pub const FIT_MARGIN: f64 = 1e-3;
/// Horizon for the matching search when no trajectory is supplied.
pub const DEFAULT_HORIZON: f64 = 1e8;
const GRID_PER_DECADE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeConstants {
    pub x1: f64,
    pub x2: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone)]
pub struct Envelopes {
    pub constants: EnvelopeConstants,
    pub eps: f64,
    /// From here on `W(t) ∈ [1−ε, 1+ε]` on the check grid.
    pub lower_from: f64,
    /// From here on additionally `σ(t) g'(x_U(t)) > 1/ε`.
    pub upper_from: f64,
    pub horizon: f64,
    nonlin: NonlinearitySpec,
    sigma: SigmaSpec,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SandwichReport {
    pub lower_checked: usize,
    pub upper_checked: usize,
    pub lower_violations: usize,
    pub upper_violations: usize,
    /// Smallest `(x − x_L)/x` seen.
    pub lower_margin: f64,
    /// Smallest `(x_U − x)/x` seen.
    pub upper_margin: f64,
    pub first_violation: Option<(f64, f64, f64, f64)>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0 && self.lower_checked > 0 && self.upper_checked > 0
    }
}

impl Envelopes {
    pub fn log_g_lower(&self, t: f64) -> Result<f64> {
        Ok(self.constants.x1.ln() - self.constants.c1 * self.sigma.integral(t)?)
    }

    pub fn log_g_upper(&self, t: f64) -> Result<f64> {
        Ok(self.constants.x2.ln() - self.constants.c2 * self.sigma.integral(t)?)
    }

    /// `x_L(t) = g⁻¹(x₁ exp(−C₁ I(t)))`, evaluated in log space.
    pub fn lower(&self, t: f64) -> Result<f64> {
        self.nonlin.g_inverse_log(self.log_g_lower(t)?)
    }

    pub fn upper(&self, t: f64) -> Result<f64> {
        self.nonlin.g_inverse_log(self.log_g_upper(t)?)
    }

    /// Checks `x_L < x` at every node past `lower_from` and `x < x_U` at every
    /// node past `upper_from`, up to the horizon.
    pub fn check_sandwich(&self, traj: &Trajectory) -> Result<SandwichReport> {
        let mut rep = SandwichReport {
            lower_margin: f64::INFINITY,
            upper_margin: f64::INFINITY,
            ..Default::default()
        };
        for (&t, &x) in traj.times().iter().zip(traj.values()) {
            if t > self.horizon {
                break;
            }
            let mut bad = false;
            let (mut xl, mut xu) = (f64::NAN, f64::NAN);
            if t >= self.lower_from {
                xl = self.lower(t)?;
                rep.lower_checked += 1;
                rep.lower_margin = rep.lower_margin.min((x - xl) / x);
                if !(xl < x) {
                    rep.lower_violations += 1;
                    bad = true;
                }
            }
            if t >= self.upper_from {
                xu = self.upper(t)?;
                rep.upper_checked += 1;
                rep.upper_margin = rep.upper_margin.min((xu - x) / x);
                if !(x < xu) {
                    rep.upper_violations += 1;
                    bad = true;
                }
            }
            if bad && rep.first_violation.is_none() {
                rep.first_violation = Some((t, xl, x, xu));
            }
        }
        Ok(rep)
    }
}

fn check_grid(horizon: f64) -> Vec<f64> {
    let lo = 1e-3f64.min(horizon / 10.0);
    let n = ((horizon / lo).log10() * GRID_PER_DECADE).ceil() as usize + 1;
    let mut g = vec![0.0];
    g.extend(numeric::geomspace(lo, horizon, n.max(2)));
    g
}

/// First grid time after which `ok` holds at every later grid point.
fn settles_from(grid: &[f64], ok: impl Fn(f64) -> bool) -> f64 {
    match grid.iter().rposition(|&t| !ok(t)) {
        None => grid[0],
        Some(i) if i + 1 < grid.len() => grid[i + 1],
        Some(_) => f64::INFINITY,
    }
}

/// `log g(x(s)) + C I(s)` on history samples and on nodes and midpoints in `[0, t_hi]`.
fn scaled_log_g_range(
    traj: &Trajectory,
    nonlin: &NonlinearitySpec,
    sigma: &SigmaSpec,
    c: f64,
    t_hi: f64,
) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |s: f64, x: f64| -> Result<()> {
        let v = nonlin.log_g(x)? + c * sigma.integral(s)?;
        lo = lo.min(v);
        hi = hi.max(v);
        Ok(())
    };
    let tb = traj.tau_bar();
    if tb > 0.0 {
        for k in 0..=64 {
            let s = -tb + tb * k as f64 / 64.0;
            visit(s, traj.history().value(s))?;
        }
    }
    let (ts, xs) = (traj.times(), traj.values());
    for i in 0..ts.len() {
        if ts[i] > t_hi {
            break;
        }
        visit(ts[i], xs[i])?;
        if i + 1 < ts.len() && ts[i + 1] <= t_hi {
            let m = 0.5 * (ts[i] + ts[i + 1]);
            visit(m, traj.interpolate(m)?)?;
        }
    }
    Ok((lo, hi))
}

/// Builds `x_L`, `x_U` for `problem` with the given σ. Missing `x₁`, `x₂` are
/// fitted from `traj` over the matching interval; the default `C₁`, `C₂` are
/// `log(a/b)/(1−ε)` and `c₂(ε)`.
pub fn build_envelopes(
    problem: &ProblemSpec,
    sigma: &SigmaSpec,
    eps: f64,
    constants: Option<EnvelopeConstants>,
    traj: Option<&Trajectory>,
) -> Result<Envelopes> {
    let (a, b) = (problem.a, problem.b);
    if !(a > b && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "requires a > b > 0 (got a = {a}, b = {b})"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(
            "build_envelopes",
            format!("requires 0 < eps < 1 (got {eps})"),
        ));
    }
    if sigma.is_unused() {
        return Err(Error::Unsupported(
            "envelopes need sigma; the delay has tau(t)/t -> 0".into(),
        ));
    }
    let nonlin = &problem.nonlinearity;
    let horizon = traj.map_or(DEFAULT_HORIZON, |t| t.t_end());
    let grid = check_grid(horizon);
    let window_ok = |t: f64| {
        sigma
            .window_integral(&problem.delay, t)
            .is_ok_and(|w| (w - 1.0).abs() <= eps)
    };
    let lower_from = settles_from(&grid, window_ok);
    if !lower_from.is_finite() {
        return Err(Error::RegimeMismatch(format!(
            "window integral does not settle within {eps} of 1 by t = {horizon:e}"
        )));
    }
    let grid: Vec<f64> = grid.into_iter().filter(|&t| t >= lower_from).collect();
    let sigma_ok = |log_x2: f64, c2: f64, t: f64| -> bool {
        let ly = sigma.integral(t).map(|i| log_x2 - c2 * i);
        let y = ly.and_then(|ly| nonlin.g_inverse_log(ly));
        let d = y.and_then(|y| nonlin.log_g_prime(y));
        d.is_ok_and(|lgp| lgp + sigma.sigma(t).ln() > -eps.ln())
    };

    let (constants, upper_from) = match constants {
        Some(c) => {
            if !(c.x1 > 0.0 && c.x2 > 0.0 && c.c1 > 0.0 && c.c2 > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "envelope constants must be positive ({c:?})"
                )));
            }
            let from = settles_from(&grid, |t| sigma_ok(c.x2.ln(), c.c2, t));
            (c, from.max(lower_from))
        }
        None => {
            let traj = traj.ok_or_else(|| {
                Error::InvalidParameter("build_envelopes needs either constants or a trajectory".into())
            })?;
            let c1 = (a / b).ln() / (1.0 - eps);
            let c2 = c2_root(a, b, eps)?;
            let (lo1, _) = scaled_log_g_range(traj, nonlin, sigma, c1, lower_from)?;
            let log_x1 = lo1 + (-FIT_MARGIN).ln_1p();
            // Larger x₂ only raises g'(x_U) on the range of interest, but the
            // condition is rechecked with each refit rather than assumed.
            let mut from = lower_from;
            let mut log_x2;
            let mut rounds = 0;
            loop {
                let (_, hi2) = scaled_log_g_range(traj, nonlin, sigma, c2, from)?;
                log_x2 = hi2 + FIT_MARGIN.ln_1p();
                let next = settles_from(&grid, |t| t >= from && sigma_ok(log_x2, c2, t) || t < from);
                if next <= from {
                    break;
                }
                from = next;
                rounds += 1;
                if rounds > 60 || !from.is_finite() {
                    return Err(Error::RegimeMismatch(format!(
                        "sigma(t) g'(x_U(t)) > 1/eps does not settle by t = {horizon:e}"
                    )));
                }
            }
            (
                EnvelopeConstants {
                    x1: log_x1.exp(),
                    x2: log_x2.exp(),
                    c1,
                    c2,
                },
                from,
            )
        }
    };
    Ok(Envelopes {
        constants,
        eps,
        lower_from,
        upper_from,
        horizon,
        nonlin: nonlin.clone(),
        sigma: sigma.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelaySpec;
    use crate::integrator::History;
    use crate::sigma::build_sigma;

    fn problem(nonlin: NonlinearitySpec) -> ProblemSpec {
        ProblemSpec::new(
            2.0,
            1.0,
            nonlin,
            DelaySpec::power_gap(0.5, 1.0).unwrap(),
            History::constant(0.4),
        )
    }

    #[test]
    fn default_constants() {
        let p = problem(NonlinearitySpec::power_law(2.0));
        let sigma = build_sigma(&p.delay).unwrap();
        let c = EnvelopeConstants {
            x1: 0.04,
            x2: 0.09,
            c1: 2f64.ln() / 0.9,
            c2: c2_root(2.0, 1.0, 0.1).unwrap(),
        };
        assert!((c.c1 - 0.7702).abs() < 1e-4);
        assert!(c.c2 < 2f64.ln() && 2f64.ln() < c.c1);
        let env = build_envelopes(&p, &sigma, 0.1, Some(c), None).unwrap();
        for &t in &[0.0, 1.0, 10.0, 1e4] {
            let i = sigma.integral(t).unwrap();
            let want = 0.04f64.sqrt() * (-c.c1 * i / 2.0).exp();
            assert!((env.lower(t).unwrap() - want).abs() <= 1e-15 * want.max(1e-300), "{t}");
            assert!(env.log_g_lower(t).unwrap() < env.log_g_upper(t).unwrap());
        }
        assert!(env.lower_from > 0.0 && env.upper_from >= env.lower_from);
    }

    #[test]
    fn needs_constants_or_trajectory() {
        let p = problem(NonlinearitySpec::exp_poly(1.0));
        let sigma = build_sigma(&p.delay).unwrap();
        assert!(build_envelopes(&p, &sigma, 0.2, None, None).is_err());
        assert!(build_envelopes(&p, &sigma, 1.0, None, None).is_err());
    }

    #[test]
    fn window_never_settles() {
        let p = ProblemSpec::new(
            2.0,
            1.0,
            NonlinearitySpec::power_law(2.0),
            DelaySpec::proportional(0.5).unwrap(),
            History::constant(0.4),
        );
        // σ for q = 0.9 paired with a q = 0.5 delay: W → log 2 / log 10
        let sigma = SigmaSpec::linear(10f64.ln(), 2.0).unwrap();
        let c = EnvelopeConstants {
            x1: 0.1,
            x2: 0.2,
            c1: 1.0,
            c2: 0.5,
        };
        assert!(matches!(
            build_envelopes(&p, &sigma, 0.2, Some(c), None),
            Err(Error::RegimeMismatch(_))
        ));
    }
}
