//! Delays described through their gap function `t ↦ t − τ(t)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::RealFn;
use crate::numeric;

/// Horizon used to scan custom gaps for their minimum when none is given.
pub const DEFAULT_SCAN_HORIZON: f64 = 1e8;

const E2: f64 = 7.389_056_098_930_65;

#[derive(Clone)]
pub struct CustomGap {
    pub gap: RealFn,
}

impl fmt::Debug for CustomGap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomGap")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayFamily {
    /// `τ(t) = τ₀`
    Constant { tau0: f64 },
    /// `t − τ(t) = (1 − q) t`
    Proportional { q: f64 },
    /// `τ(t) = c t^ρ`
    Sublinear { rho: f64, c: f64 },
    /// `t − τ(t) = min(C t^γ, t)`
    PowerGap { gamma: f64, c: f64 },
    /// `t − τ(t) = min(C t / (log t)^γ, t)` for `t ≥ e²`, with `log t` frozen at 2 below.
    LogGap { gamma: f64, c: f64 },
    #[serde(skip)]
    Custom(CustomGap),
}

/// Limit of `τ(t)/t`, or of `σ(t)/t`, with an honesty flag for the numerical cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate {
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub value: f64,
    /// False when the samples did not settle; `value` is then the last sample.
    pub determinate: bool,
    /// Spread of the samples used to decide.
    pub spread: f64,
}

impl LimitEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            determinate: true,
            spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DelayFamily", into = "DelayFamily")]
pub struct DelaySpec {
    pub family: DelayFamily,
    tau_bar: f64,
}

impl TryFrom<DelayFamily> for DelaySpec {
    type Error = Error;
    fn try_from(family: DelayFamily) -> Result<Self> {
        DelaySpec::new(family)
    }
}

impl From<DelaySpec> for DelayFamily {
    fn from(d: DelaySpec) -> Self {
        d.family
    }
}

impl DelaySpec {
    pub fn new(family: DelayFamily) -> Result<Self> {
        Self::with_horizon(family, DEFAULT_SCAN_HORIZON)
    }

    /// Scans custom gaps up to `horizon` for `τ̄`.
    pub fn with_horizon(family: DelayFamily, horizon: f64) -> Result<Self> {
        validate_family(&family)?;
        let mut spec = Self { family, tau_bar: 0.0 };
        spec.tau_bar = compute_tau_bar(&spec, horizon)?;
        Ok(spec)
    }

    pub fn constant(tau0: f64) -> Result<Self> {
        Self::new(DelayFamily::Constant { tau0 })
    }

    pub fn proportional(q: f64) -> Result<Self> {
        Self::new(DelayFamily::Proportional { q })
    }

    pub fn sublinear(rho: f64, c: f64) -> Result<Self> {
        Self::new(DelayFamily::Sublinear { rho, c })
    }

    pub fn power_gap(gamma: f64, c: f64) -> Result<Self> {
        Self::new(DelayFamily::PowerGap { gamma, c })
    }

    pub fn log_gap(gamma: f64, c: f64) -> Result<Self> {
        Self::new(DelayFamily::LogGap { gamma, c })
    }

    pub fn custom(gap: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Result<Self> {
        Self::with_horizon(DelayFamily::Custom(CustomGap { gap: Arc::new(gap) }), horizon)
    }

    /// `τ̄ = −inf_{t ≥ 0} (t − τ(t))`, never negative.
    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            DelayFamily::Constant { .. } => "constant",
            DelayFamily::Proportional { .. } => "proportional",
            DelayFamily::Sublinear { .. } => "sublinear",
            DelayFamily::PowerGap { .. } => "power_gap",
            DelayFamily::LogGap { .. } => "log_gap",
            DelayFamily::Custom(_) => "custom",
        }
    }

    /// The delayed argument `t − τ(t)`. Defined for `t ≥ 0`; no checks, hot path.
    #[inline]
    pub fn gap(&self, t: f64) -> f64 {
        match &self.family {
            DelayFamily::Constant { tau0 } => t - tau0,
            DelayFamily::Proportional { q } => (1.0 - q) * t,
            DelayFamily::Sublinear { rho, c } => t - c * t.powf(*rho),
            DelayFamily::PowerGap { gamma, c } => (c * t.powf(*gamma)).min(t),
            DelayFamily::LogGap { gamma, c } => {
                let l = if t >= E2 { t.ln() } else { 2.0 };
                (c * t / l.powf(*gamma)).min(t)
            }
            DelayFamily::Custom(cg) => (cg.gap)(t),
        }
    }

    pub fn tau(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain("tau", format!("t = {t} is negative")));
        }
        let tau = t - self.gap(t);
        if tau >= 0.0 {
            Ok(tau)
        } else if tau > -1e-12 {
            Ok(0.0)
        } else {
            Err(Error::domain(
                "tau",
                format!("delay is negative ({tau:e}) at t = {t:e}"),
            ))
        }
    }

    /// Limit of `τ(t)/t` as `t → ∞`.
    pub fn q_limit(&self) -> LimitEstimate {
        match &self.family {
            DelayFamily::Constant { .. } | DelayFamily::Sublinear { .. } => LimitEstimate::exact(0.0),
            DelayFamily::Proportional { q } => LimitEstimate::exact(*q),
            DelayFamily::PowerGap { .. } | DelayFamily::LogGap { .. } => LimitEstimate::exact(1.0),
            DelayFamily::Custom(_) => {
                let ts = numeric::geomspace(1e4, 1e12, 9);
                let r: Vec<f64> = ts.iter().map(|&t| (t - self.gap(t)) / t).collect();
                let tail = &r[r.len() - 3..];
                let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let spread = hi - lo;
                LimitEstimate {
                    value: *r.last().unwrap(),
                    determinate: spread.is_finite() && spread <= 1e-3,
                    spread,
                }
            }
        }
    }

    /// Checks that the gap grows without bound on a geometric grid up to `horizon`.
    pub fn check_gap_growth(&self, horizon: f64) -> Result<()> {
        let grid = numeric::geomspace(1.0, horizon.max(10.0), 60);
        let last = self.gap(*grid.last().unwrap());
        let mid = self.gap(horizon.max(10.0).sqrt());
        if !(last > mid && last > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gap t - tau(t) does not grow towards infinity (gap({:e}) = {mid:e}, gap({:e}) = {last:e})",
                horizon.sqrt(),
                horizon
            )));
        }
        for &t in &grid {
            self.tau(t)?;
        }
        Ok(())
    }
}

fn validate_family(family: &DelayFamily) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidParameter(msg));
    match family {
        DelayFamily::Constant { tau0 } if !(*tau0 > 0.0 && tau0.is_finite()) => {
            bad(format!("constant delay requires tau0 > 0 (got {tau0})"))
        }
        DelayFamily::Proportional { q } if !(*q > 0.0 && *q < 1.0) => {
            bad(format!("proportional delay requires 0 < q < 1 (got {q})"))
        }
        DelayFamily::Sublinear { rho, c } if !(*rho > 0.0 && *rho < 1.0 && *c > 0.0) => bad(format!(
            "sublinear delay requires 0 < rho < 1 and c > 0 (got rho = {rho}, c = {c})"
        )),
        DelayFamily::PowerGap { gamma, c } if !(*gamma > 0.0 && *gamma < 1.0 && *c > 0.0) => bad(format!(
            "power_gap requires 0 < gamma < 1 and c > 0 (got gamma = {gamma}, c = {c})"
        )),
        DelayFamily::LogGap { gamma, c } if !(*gamma > 0.0 && *c > 0.0) => bad(format!(
            "log_gap requires gamma > 0 and c > 0 (got gamma = {gamma}, c = {c})"
        )),
        _ => Ok(()),
    }
}

/// `τ̄` over `[0, horizon]`: closed form for built-in families, grid scan plus
/// golden-section refinement for custom gaps.
pub fn compute_tau_bar(spec: &DelaySpec, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::domain(
            "compute_tau_bar",
            format!("horizon = {horizon} is not positive"),
        ));
    }
    match &spec.family {
        DelayFamily::Constant { tau0 } => Ok(*tau0),
        DelayFamily::Proportional { .. } | DelayFamily::PowerGap { .. } | DelayFamily::LogGap { .. } => Ok(0.0),
        DelayFamily::Sublinear { rho, c } => {
            // t − c t^ρ is minimised where c ρ t^{ρ−1} = 1.
            let ts = (c * rho).powf(1.0 / (1.0 - rho));
            Ok((c * ts.powf(*rho) - ts).max(0.0))
        }
        DelayFamily::Custom(_) => {
            let mut grid = vec![0.0];
            grid.extend(numeric::geomspace(horizon * 1e-12, horizon, 10_000));
            let vals: Vec<f64> = grid.iter().map(|&t| spec.gap(t)).collect();
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(
                    "custom gap is not finite on the scan grid".into(),
                ));
            }
            let (imin, &vmin) = vals
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("grid is non-empty");
            if imin + 1 == grid.len() {
                return Err(Error::InvalidParameter(format!(
                    "custom gap still decreasing at the scan horizon {horizon:e}; tau_bar is not finite on the grid"
                )));
            }
            let lo = grid[imin.saturating_sub(1)];
            let hi = grid[imin + 1];
            let (_, refined) = numeric::golden_min(|t| spec.gap(t), lo, hi, 1e-12 * hi.max(1.0));
            let m = vmin.min(refined).min(spec.gap(lo)).min(spec.gap(hi));
            Ok((-m).max(0.0))
        }
    }
}
