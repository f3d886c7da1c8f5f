//! The auxiliary function σ whose reciprocal integral `I(t) = ∫_0^t ds/σ(s)`
//! measures the delay window: `I(t) − I(t − τ(t)) → 1`.

use std::f64::consts::E;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::delay::{DelayFamily, DelaySpec, LimitEstimate};
use crate::error::{Error, Result};
use crate::nonlinearity::RealFn;
use crate::numeric::{self, QuadOptions};

const E2: f64 = 7.389_056_098_930_65;

#[derive(Clone)]
pub struct CustomSigma {
    pub sigma: RealFn,
    /// Closed form of `I`, if known. Quadrature is used otherwise.
    pub integral: Option<RealFn>,
}

impl fmt::Debug for CustomSigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSigma")
            .field("integral", &self.integral.is_some())
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaForm {
    /// `σ(t) = λ (t + c)`
    Linear { lambda: f64, c: f64 },
    /// `σ(t) = κ (t + c) log(t + c)`
    TLog { kappa: f64, c: f64 },
    /// `σ(t) = κ (t + c) log log(t + c)`
    TLogLog { kappa: f64, c: f64 },
    /// Marker for delays with `τ(t)/t → 0`, where no σ enters the rate.
    Unused,
    #[serde(skip)]
    Custom(CustomSigma),
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaSpec {
    #[serde(flatten)]
    pub form: SigmaForm,
    /// Left end `−τ̄` of the interval on which σ must be positive.
    pub domain_start: f64,
}

impl SigmaSpec {
    pub fn new(form: SigmaForm, domain_start: f64) -> Result<Self> {
        let spec = Self { form, domain_start };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear(lambda: f64, c: f64) -> Result<Self> {
        Self::new(SigmaForm::Linear { lambda, c }, 0.0)
    }

    pub fn t_log(kappa: f64, c: f64) -> Result<Self> {
        Self::new(SigmaForm::TLog { kappa, c }, 0.0)
    }

    pub fn t_log_log(kappa: f64, c: f64) -> Result<Self> {
        Self::new(SigmaForm::TLogLog { kappa, c }, 0.0)
    }

    pub fn is_unused(&self) -> bool {
        matches!(self.form, SigmaForm::Unused)
    }

    pub fn name(&self) -> &'static str {
        match self.form {
            SigmaForm::Linear { .. } => "linear",
            SigmaForm::TLog { .. } => "t_log",
            SigmaForm::TLogLog { .. } => "t_log_log",
            SigmaForm::Unused => "unused",
            SigmaForm::Custom(_) => "custom",
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.domain_start;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(s <= 0.0) {
            return bad(format!("sigma domain_start must be <= 0 (got {s})"));
        }
        match &self.form {
            SigmaForm::Linear { lambda, c } if !(*lambda > 0.0 && c + s > 0.0) => bad(format!(
                "linear sigma requires lambda > 0 and c > tau_bar (got lambda = {lambda}, c = {c})"
            )),
            SigmaForm::TLog { kappa, c } if !(*kappa > 0.0 && c + s > 1.0) => bad(format!(
                "t_log sigma requires kappa > 0 and c - tau_bar > 1 (got kappa = {kappa}, c = {c})"
            )),
            SigmaForm::TLogLog { kappa, c } if !(*kappa > 0.0 && c + s > E) => bad(format!(
                "t_log_log sigma requires kappa > 0 and c - tau_bar > e (got kappa = {kappa}, c = {c})"
            )),
            _ => Ok(()),
        }
    }

    /// σ(t). Returns NaN for the unused marker.
    pub fn sigma(&self, t: f64) -> f64 {
        match &self.form {
            SigmaForm::Linear { lambda, c } => lambda * (t + c),
            SigmaForm::TLog { kappa, c } => kappa * (t + c) * (t + c).ln(),
            SigmaForm::TLogLog { kappa, c } => kappa * (t + c) * (t + c).ln().ln(),
            SigmaForm::Unused => f64::NAN,
            SigmaForm::Custom(cs) => (cs.sigma)(t),
        }
    }

    /// Signed `I(t) = ∫_0^t ds/σ(s)` for `t ≥ domain_start`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        if !(t >= self.domain_start) {
            return Err(Error::domain(
                "integral_inv_sigma",
                format!("t = {t} lies left of the sigma domain start {}", self.domain_start),
            ));
        }
        match &self.form {
            SigmaForm::Linear { lambda, c } => Ok(((t + c) / c).ln() / lambda),
            SigmaForm::TLog { kappa, c } => Ok(((t + c).ln() / c.ln()).ln() / kappa),
            SigmaForm::TLogLog { kappa, c } => Ok(inv_ln_integral(c.ln(), (t + c).ln())? / kappa),
            SigmaForm::Unused => Err(unused_error()),
            SigmaForm::Custom(cs) => match &cs.integral {
                Some(i) => Ok(i(t)),
                None => self.numeric_integral(0.0, t),
            },
        }
    }

    fn numeric_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let (a, b, sign) = if lo <= hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
        let mut breaks = Vec::new();
        let mut p = 1.0;
        while p < b {
            if p > a {
                breaks.push(p);
            }
            p *= 10.0;
        }
        let opts = QuadOptions {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            max_intervals: 20_000,
        };
        let r = numeric::integrate_with_breaks(|s| 1.0 / self.sigma(s), a, b, &breaks, opts)?;
        Ok(sign * r.value)
    }

    /// `I(t)` for `t ≥ 0`.
    pub fn integral_inv_sigma(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain("integral_inv_sigma", format!("t = {t} is negative")));
        }
        self.integral(t)
    }

    /// `∫_{t−τ(t)}^t ds/σ(s)`, evaluated as a difference in a form that avoids cancellation.
    pub fn window_integral(&self, delay: &DelaySpec, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain("window_integral", format!("t = {t} is negative")));
        }
        let gap = delay.gap(t);
        if gap < self.domain_start - 1e-12 * self.domain_start.abs().max(1.0) {
            return Err(Error::domain(
                "window_integral",
                format!(
                    "gap({t}) = {gap} lies left of the sigma domain start {}",
                    self.domain_start
                ),
            ));
        }
        let gap = gap.max(self.domain_start);
        match &self.form {
            SigmaForm::Linear { lambda, c } => Ok(((t + c) / (gap + c)).ln() / lambda),
            SigmaForm::TLog { kappa, c } => Ok(((t + c).ln() / (gap + c).ln()).ln() / kappa),
            SigmaForm::TLogLog { kappa, c } => Ok(inv_ln_integral((gap + c).ln(), (t + c).ln())? / kappa),
            SigmaForm::Unused => Err(unused_error()),
            SigmaForm::Custom(cs) => match &cs.integral {
                Some(i) => Ok(i(t) - i(gap)),
                None => self.numeric_integral(gap, t),
            },
        }
    }

    /// Limit of `σ(t)/t`.
    pub fn lambda(&self) -> LimitEstimate {
        lambda_of_sigma(self)
    }
}

fn unused_error() -> Error {
    Error::Unsupported("sigma is not used for delays with tau(t)/t -> 0".into())
}

/// `∫_lo^hi du / ln u` for `lo, hi > 1`.
fn inv_ln_integral(lo: f64, hi: f64) -> Result<f64> {
    let opts = QuadOptions {
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_intervals: 2000,
    };
    let breaks = numeric::quad::unit_breaks(lo, hi, 64);
    Ok(numeric::integrate_with_breaks(|u: f64| 1.0 / u.ln(), lo, hi, &breaks, opts)?.value)
}

/// Constructs σ for a built-in delay family.
pub fn build_sigma(delay: &DelaySpec) -> Result<SigmaSpec> {
    let tb = delay.tau_bar();
    let form = match &delay.family {
        DelayFamily::Proportional { q } => SigmaForm::Linear {
            lambda: (1.0 / (1.0 - q)).ln(),
            c: tb + 1.0,
        },
        DelayFamily::LogGap { gamma, .. } => SigmaForm::TLogLog {
            kappa: *gamma,
            c: 2.0 * tb + E2,
        },
        // The shift 2τ̄ + 1 would give σ(0) = 0 when τ̄ = 0, making I infinite
        // for every t > 0; shifting by e keeps log(t + c) ≥ 1.
        DelayFamily::PowerGap { gamma, .. } => SigmaForm::TLog {
            kappa: (1.0 / gamma).ln(),
            c: 2.0 * tb + E,
        },
        DelayFamily::Constant { .. } | DelayFamily::Sublinear { .. } => SigmaForm::Unused,
        DelayFamily::Custom(_) => return Err(Error::Unsupported("custom delays need a user-supplied sigma".into())),
    };
    SigmaSpec::new(form, -tb)
}

pub fn lambda_of_sigma(sigma: &SigmaSpec) -> LimitEstimate {
    match &sigma.form {
        SigmaForm::Linear { lambda, .. } => LimitEstimate::exact(*lambda),
        SigmaForm::TLog { .. } | SigmaForm::TLogLog { .. } => LimitEstimate::exact(f64::INFINITY),
        SigmaForm::Unused => LimitEstimate::exact(0.0),
        SigmaForm::Custom(_) => {
            let ts = numeric::geomspace(1e4, 1e12, 9);
            let r: Vec<f64> = ts.iter().map(|&t| sigma.sigma(t) / t).collect();
            let last = *r.last().unwrap();
            let tail = &r[r.len() - 3..];
            let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let spread = hi - lo;
            if spread <= 1e-3 * hi.abs().max(1e-300) {
                return LimitEstimate {
                    value: last,
                    determinate: true,
                    spread,
                };
            }
            let d: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
            let increasing = d.iter().all(|&x| x > 0.0);
            let decreasing = d.iter().all(|&x| x < 0.0);
            if increasing && d[d.len() - 1] >= 0.5 * d[0] {
                LimitEstimate {
                    value: f64::INFINITY,
                    determinate: true,
                    spread,
                }
            } else if decreasing && last < 1e-3 * r[0] {
                LimitEstimate {
                    value: 0.0,
                    determinate: true,
                    spread,
                }
            } else {
                LimitEstimate {
                    value: last,
                    determinate: false,
                    spread,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail,
    Indeterminate,
}

impl Check {
    fn from_bool(b: bool) -> Self {
        if b {
            Check::Pass
        } else {
            Check::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// `|window − 1|` shrank over the last decade.
    Toward,
    Away,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub t1: Check,
    pub t2: Check,
    pub t3: Check,
    pub t4: Check,
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub lambda: f64,
    /// σ(t)/t → ∞.
    pub rapid: bool,
    pub window_values: Vec<(f64, f64)>,
    /// `|window − 1|` at the end of each decade up to the horizon.
    pub decade_deviation: Vec<(f64, f64)>,
    pub drift: Option<Drift>,
    /// `I(t)/log σ(t)` at the horizon; tends to 0 when σ(t)/t → ∞.
    pub integral_over_log_sigma: Option<f64>,
    pub tol: f64,
    pub horizon: f64,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        [self.t1, self.t2, self.t3, self.t4].iter().all(|c| *c == Check::Pass)
    }
}

/// Numerically certifies the four σ conditions on `[−τ̄, horizon]`.
/// Failures are recorded in the report, not raised.
pub fn check_sigma_conditions(sigma: &SigmaSpec, delay: &DelaySpec, horizon: f64, tol: f64) -> ConditionReport {
    let mut notes = Vec::new();
    let mut report = ConditionReport {
        t1: Check::Indeterminate,
        t2: Check::Indeterminate,
        t3: Check::Indeterminate,
        t4: Check::Indeterminate,
        lambda: f64::NAN,
        rapid: false,
        window_values: Vec::new(),
        decade_deviation: Vec::new(),
        drift: None,
        integral_over_log_sigma: None,
        tol,
        horizon,
        notes: Vec::new(),
    };
    if sigma.is_unused() {
        report
            .notes
            .push("sigma unused: tau(t)/t -> 0, the rate is normalised by G^-1(t)".into());
        report.lambda = 0.0;
        return report;
    }
    let horizon = horizon.max(10.0);

    // (t1) positivity and finiteness on a grid covering [−τ̄, horizon]
    let mut grid: Vec<f64> = (0..=100)
        .map(|k| sigma.domain_start + (1.0 - sigma.domain_start) * k as f64 / 100.0)
        .collect();
    grid.extend(numeric::geomspace(1.0, horizon, 400));
    let bad = grid.iter().find(|&&t| {
        let s = sigma.sigma(t);
        !(s > 0.0 && s.is_finite())
    });
    report.t1 = Check::from_bool(bad.is_none());
    if let Some(t) = bad {
        notes.push(format!("sigma not positive/finite at t = {t:e}"));
    }

    // (t2) σ → ∞ and I diverges. Decade increments of I that decay no faster
    // than 1/k (the harmonic borderline) are read as divergence.
    let decades = horizon.log10().floor() as i32;
    let dec_t: Vec<f64> = (0..=decades).map(|k| 10f64.powi(k)).collect();
    let sig: Vec<f64> = dec_t.iter().map(|&t| sigma.sigma(t)).collect();
    let sigma_grows = sig.windows(2).skip(sig.len() / 2).all(|w| w[1] > w[0]) && sig[sig.len() - 1] > 2.0 * sig[0];
    let ints: Result<Vec<f64>> = dec_t.iter().map(|&t| sigma.integral(t)).collect();
    match ints {
        Ok(ints) if ints.len() >= 3 => {
            let inc: Vec<f64> = ints.windows(2).map(|w| w[1] - w[0]).collect();
            let first = inc[0];
            let k_last = inc.len() as f64;
            let last = inc[inc.len() - 1] * k_last;
            let diverging = inc.iter().all(|&d| d > 0.0) && last >= 0.5 * first;
            report.t2 = Check::from_bool(diverging && sigma_grows);
            if !diverging {
                notes.push(format!(
                    "decade increments of I decay faster than 1/k (first {first:e}, k*last {last:e})"
                ));
            }
            if !sigma_grows {
                notes.push("sigma does not grow on the decade grid".into());
            }
        }
        Ok(_) => notes.push("horizon too short to judge divergence of I".into()),
        Err(e) => {
            report.t2 = Check::Fail;
            notes.push(format!("I(t) failed: {e}"));
        }
    }

    // (t3) window integral at the last decade, and its drift across decades
    let last_decade = numeric::geomspace(horizon / 10.0, horizon, 11);
    let mut ok3 = true;
    for &t in &last_decade {
        match sigma.window_integral(delay, t) {
            Ok(w) => {
                ok3 &= (w - 1.0).abs() <= tol;
                report.window_values.push((t, w));
            }
            Err(e) => {
                ok3 = false;
                notes.push(format!("window integral failed at t = {t:e}: {e}"));
                break;
            }
        }
    }
    report.t3 = Check::from_bool(ok3);
    for &t in dec_t.iter().skip(1) {
        if let Ok(w) = sigma.window_integral(delay, t) {
            report.decade_deviation.push((t, (w - 1.0).abs()));
        }
    }
    if report.decade_deviation.len() >= 2 {
        let n = report.decade_deviation.len();
        let (a, b) = (report.decade_deviation[n - 2].1, report.decade_deviation[n - 1].1);
        report.drift = Some(if b <= a { Drift::Toward } else { Drift::Away });
    }

    // (t4) classification of σ(t)/t
    let lam = lambda_of_sigma(sigma);
    report.lambda = lam.value;
    report.t4 = if lam.determinate {
        Check::Pass
    } else {
        Check::Indeterminate
    };
    report.rapid = lam.determinate && lam.value.is_infinite();
    if report.rapid {
        if let Ok(i) = sigma.integral(horizon) {
            report.integral_over_log_sigma = Some(i / sigma.sigma(horizon).ln());
        }
    }
    report.notes = notes;
    report
}
