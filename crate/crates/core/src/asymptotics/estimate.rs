use std::io::Write;

use serde::Serialize;

use super::regime::{Normalizer, Observable, Prediction, PredictionKind, RegimeReport};
use crate::error::{Error, Result};
use crate::integrator::{ObservableRow, ObservableSeries};
use crate::nonlinearity::NonlinearitySpec;
use crate::serde_ext::fmt_f64;
use crate::sigma::{Drift, SigmaSpec};

/// Statistics of one ratio `observable / normalizer` along a series.
#[derive(Debug, Clone, Serialize)]
pub struct RatioStats {
    pub observable: Observable,
    pub normalizer: Normalizer,
    pub ratio_samples: Vec<(f64, f64)>,
    /// Mean over the last decade.
    pub tail_value: f64,
    /// `max − min` over the last decade.
    pub tail_spread: f64,
    pub tail_min: f64,
    pub tail_max: f64,
    /// Aitken Δ² on the samples nearest `t_end/100`, `t_end/10`, `t_end`.
    pub extrapolated: Option<f64>,
    /// `(decade end, mean over the decade)`, oldest first, up to three decades.
    pub decade_means: Vec<(f64, f64)>,
    /// `Δ numerator / Δ normalizer` between `t_end/100` and `t_end`. Shares the
    /// limit of the ratio but is blind to additive constants in either part.
    pub increment_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    #[serde(flatten)]
    pub primary: RatioStats,
    pub secondary: Option<RatioStats>,
    /// Whether the last decade mean is closer to the prediction than the one before.
    pub drift: Option<Drift>,
    /// Tail mean of `log g(x)` over the same normalizer, for log-limit regimes
    /// stated on `log x`.
    pub log_g_tail_value: Option<f64>,
}

impl RateEstimate {
    pub fn tail_value(&self) -> f64 {
        self.primary.tail_value
    }

    pub fn tail_spread(&self) -> f64 {
        self.primary.tail_spread
    }

    /// Pass/fail against `report` at relative tolerance `tol`. For bounds the
    /// tail min must clear `(1 − tol)·lower` and the tail max stay finite (and
    /// below `(1 + tol)·upper` when an upper bound is known).
    pub fn passes(&self, report: &RegimeReport, tol: f64) -> bool {
        check_prediction(&self.primary, &report.primary, tol)
    }
}

fn check_prediction(s: &RatioStats, p: &Prediction, tol: f64) -> bool {
    match p.kind {
        PredictionKind::ExactLimit | PredictionKind::LogLimit => {
            p.value.is_finite() && (s.tail_value - p.value).abs() <= tol * p.value.abs()
        }
        PredictionKind::TwoSidedBounds => {
            let lower_ok = if p.value.is_finite() {
                s.tail_min >= (1.0 - tol) * p.value
            } else {
                s.tail_min > 0.0
            };
            let upper_ok = match p.upper {
                Some(u) => s.tail_max <= (1.0 + tol) * u,
                None => s.tail_max.is_finite(),
            };
            lower_ok && upper_ok
        }
    }
}

fn numerator(row: &ObservableRow, obs: Observable) -> f64 {
    match obs {
        Observable::X => row.x,
        Observable::BigGX => row.big_g_x,
        Observable::LogX => row.log_x,
        Observable::LogGX => row.log_g_x,
    }
}

fn denominator(
    row: &ObservableRow,
    norm: Normalizer,
    nonlin: &NonlinearitySpec,
    sigma: Option<&SigmaSpec>,
) -> Result<Option<f64>> {
    let t = row.t;
    let v = match norm {
        Normalizer::GInverse if t > 0.0 => Some(nonlin.big_g_inverse(t)?),
        Normalizer::T if t > 0.0 => Some(t),
        Normalizer::LogT if t > 1.0 => Some(t.ln()),
        Normalizer::SigmaIntegral if t > 0.0 => {
            if row.i_t.is_finite() {
                Some(row.i_t)
            } else {
                let s = sigma.ok_or_else(|| {
                    Error::InvalidParameter("the I(t) normalizer needs sigma or an I_t column".into())
                })?;
                Some(s.integral(t)?)
            }
        }
        _ => None,
    };
    Ok(v.filter(|d| *d > 0.0 && d.is_finite()))
}

fn ratio_stats(
    series: &ObservableSeries,
    obs: Observable,
    norm: Normalizer,
    nonlin: &NonlinearitySpec,
    sigma: Option<&SigmaSpec>,
) -> Result<RatioStats> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let mut parts: Vec<(f64, f64)> = Vec::new();
    for row in &series.rows {
        let Some(d) = denominator(row, norm, nonlin, sigma)? else {
            continue;
        };
        let n = numerator(row, obs);
        let r = n / d;
        if r.is_finite() && samples.last().is_none_or(|(t, _)| row.t > *t) {
            samples.push((row.t, r));
            parts.push((n, d));
        }
    }
    let (Some(&(t0, _)), Some(&(t_last, _))) = (samples.first(), samples.last()) else {
        return Err(Error::InvalidParameter("series has no usable samples".into()));
    };
    if t_last < 1e3 * t0 * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "series covers [{t0:e}, {t_last:e}], fewer than 3 decades"
        )));
    }
    let window = |lo: f64, hi: f64| -> Vec<f64> {
        samples
            .iter()
            .filter(|(t, _)| *t >= lo && *t <= hi)
            .map(|(_, r)| *r)
            .collect()
    };
    let tail = window(t_last / 10.0, t_last);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut decade_means = Vec::new();
    for k in (0..3).rev() {
        let hi = t_last / 10f64.powi(k);
        let w = window(hi / 10.0, hi);
        if !w.is_empty() {
            decade_means.push((hi, mean(&w)));
        }
    }
    let nearest = |target: f64| -> usize {
        (0..samples.len())
            .min_by(|&i, &j| {
                let di = (samples[i].0 / target).ln().abs();
                di.total_cmp(&(samples[j].0 / target).ln().abs())
            })
            .unwrap()
    };
    let (i0, i1, i2) = (nearest(t_last / 100.0), nearest(t_last / 10.0), nearest(t_last));
    let (r0, r1, r2) = (samples[i0].1, samples[i1].1, samples[i2].1);
    let dd = parts[i2].1 - parts[i0].1;
    let increment_slope = (dd > 0.0).then(|| (parts[i2].0 - parts[i0].0) / dd);
    let denom = (r2 - r1) - (r1 - r0);
    let extrapolated = if denom.abs() > 1e-14 * r2.abs().max(1e-300) {
        Some(r2 - (r2 - r1).powi(2) / denom)
    } else {
        None
    };
    Ok(RatioStats {
        observable: obs,
        normalizer: norm,
        tail_value: mean(&tail),
        tail_spread: tail_max - tail_min,
        tail_min,
        tail_max,
        extrapolated,
        decade_means,
        increment_slope,
        ratio_samples: samples,
    })
}

/// Estimates the realised value of the ratio predicted by `report` from a
/// sampled series covering at least three decades of `t`.
pub fn estimate_rate(
    series: &ObservableSeries,
    report: &RegimeReport,
    nonlin: &NonlinearitySpec,
    sigma: Option<&SigmaSpec>,
) -> Result<RateEstimate> {
    let p = &report.primary;
    let primary = ratio_stats(series, p.observable, p.normalizer, nonlin, sigma)?;
    let secondary = match &report.secondary {
        Some(s) => Some(ratio_stats(series, s.observable, s.normalizer, nonlin, sigma)?),
        None => None,
    };
    let drift = match (p.value.is_finite(), primary.decade_means.as_slice()) {
        (true, [.., (_, prev), (_, last)]) => Some(if (last - p.value).abs() < (prev - p.value).abs() {
            Drift::Toward
        } else {
            Drift::Away
        }),
        _ => None,
    };
    let log_g_tail_value = if p.observable == Observable::LogX {
        Some(ratio_stats(series, Observable::LogGX, p.normalizer, nonlin, sigma)?.tail_value)
    } else {
        None
    };
    Ok(RateEstimate {
        primary,
        secondary,
        drift,
        log_g_tail_value,
    })
}

/// One comparison row: predicted against estimated.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub regime: String,
    pub observable: Observable,
    pub normalizer: Normalizer,
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub predicted: f64,
    pub estimated: f64,
    pub spread: f64,
    pub tol: f64,
    pub pass: bool,
}

impl SummaryRow {
    pub const HEADER: &'static str = "scenario,regime,observable,normalizer,predicted,estimated,spread,tol,pass";

    pub fn new(scenario: &str, report: &RegimeReport, est: &RateEstimate, tol: f64) -> Self {
        let value = match report.primary.kind {
            PredictionKind::TwoSidedBounds => est.primary.tail_min,
            _ => est.primary.tail_value,
        };
        Self {
            scenario: scenario.to_string(),
            regime: report.regime.as_str().to_string(),
            observable: report.primary.observable,
            normalizer: report.primary.normalizer,
            predicted: report.predicted_limit,
            estimated: value,
            spread: est.primary.tail_spread,
            tol,
            pass: est.passes(report, tol),
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.regime,
            self.observable.label(),
            self.normalizer.label(),
            fmt_f64(self.predicted),
            fmt_f64(self.estimated),
            fmt_f64(self.spread),
            fmt_f64(self.tol),
            self.pass
        )?;
        Ok(())
    }
}
