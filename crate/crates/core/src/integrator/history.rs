use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::RealFn;
use crate::numeric;

#[derive(Clone)]
pub struct CustomHistory {
    pub f: RealFn,
}

impl fmt::Debug for CustomHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomHistory")
    }
}

/// Initial function ψ on `[−τ̄, 0]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum History {
    Constant {
        value: f64,
    },
    /// `ψ(t) = Σ coeffs[k] t^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    #[serde(skip)]
    Custom(CustomHistory),
}

impl History {
    pub fn constant(value: f64) -> Self {
        History::Constant { value }
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        match self {
            History::Constant { value } => *value,
            History::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            History::Custom(c) => (c.f)(t),
        }
    }

    /// Largest value on `[lo, hi]`.
    pub fn max_on(&self, lo: f64, hi: f64) -> f64 {
        self.extremum(lo, hi, 1.0)
    }

    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        self.extremum(lo, hi, -1.0)
    }

    fn extremum(&self, lo: f64, hi: f64, sign: f64) -> f64 {
        if let History::Constant { value } = self {
            return *value;
        }
        if hi <= lo {
            return self.value(lo);
        }
        let n = 256;
        let mut best_t = lo;
        let mut best = sign * self.value(lo);
        for k in 1..=n {
            let t = lo + (hi - lo) * k as f64 / n as f64;
            let v = sign * self.value(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        let w = (hi - lo) / n as f64;
        let (a, b) = ((best_t - w).max(lo), (best_t + w).min(hi));
        let (_, m) = numeric::golden_min(|t| -sign * self.value(t), a, b, 1e-14 * (1.0 + hi.abs()));
        sign * best.max(-m)
    }

    pub fn validate(&self, tau_bar: f64) -> Result<()> {
        if let History::Polynomial { coeffs } = self {
            if coeffs.is_empty() {
                return Err(Error::InvalidParameter(
                    "polynomial history needs at least one coefficient".into(),
                ));
            }
        }
        let lo = -tau_bar;
        let min = self.min_on(lo, 0.0);
        let samples_ok = (0..=64).all(|k| {
            let v = self.value(lo * k as f64 / 64.0);
            v.is_finite() && v > 0.0
        });
        if !(min > 0.0) || !samples_ok {
            return Err(Error::InvalidParameter(format!(
                "history requires psi(t) > 0 on [-tau_bar, 0] = [{lo}, 0] (min found {min:e})"
            )));
        }
        Ok(())
    }
}
