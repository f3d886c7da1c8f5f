//! Long-horizon integration of
//!
//! ```text
//! x'(t) = −a g(x(t)) + b g(x(t − τ(t)))                       (discrete delay)
//! x'(t) = −a g(x(t)) + b max_{t−τ(t) ≤ s ≤ t} g(x(s))         (max functional)
//! ```
//!
//! with `x = ψ` on `[−τ̄, 0]`.

mod history;
mod range_max;
mod series;
mod solver;
mod trajectory;

use serde::{Deserialize, Serialize};

pub use history::{CustomHistory, History};
pub use range_max::RangeMax;
pub use series::{observable_series, observable_series_with, ObservableRow, ObservableSeries, ROWS_PER_DECADE};
pub use solver::integrate;
pub use trajectory::{Diagnostics, Hermite, Trajectory};

use crate::delay::DelaySpec;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    #[default]
    DiscreteDelay,
    MaxFunctional,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub a: f64,
    pub b: f64,
    pub nonlinearity: NonlinearitySpec,
    pub delay: DelaySpec,
    pub kind: EquationKind,
    pub history: History,
    /// Accepts `a ≥ b ≥ 0` instead of `a > b > 0`, for the closed-form checks
    /// (`b = 0` is the plain ODE, `a = b` keeps constants fixed).
    pub validation_mode: bool,
}

impl ProblemSpec {
    pub fn new(a: f64, b: f64, nonlinearity: NonlinearitySpec, delay: DelaySpec, history: History) -> Self {
        Self {
            a,
            b,
            nonlinearity,
            delay,
            kind: EquationKind::DiscreteDelay,
            history,
            validation_mode: false,
        }
    }

    pub fn with_kind(mut self, kind: EquationKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validation(mut self) -> Self {
        self.validation_mode = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.a, self.b);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter("a and b must be finite".into()));
        }
        if self.validation_mode {
            if !(a >= b && b >= 0.0 && a > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "validation mode requires a >= b >= 0 and a > 0 (got a = {a}, b = {b})"
                )));
            }
        } else if !(a > b && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "requires a > b > 0 (got a = {a}, b = {b})"
            )));
        }
        self.nonlinearity.validate()?;
        self.history.validate(self.delay.tau_bar())?;
        Ok(())
    }

    /// `max ψ` over `[−τ̄, 0]`, the a-priori bound on the solution.
    pub fn history_max(&self) -> f64 {
        self.history.max_on(-self.delay.tau_bar(), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Thinning {
    /// Keep every accepted node.
    #[default]
    Off,
    /// Drop interior nodes whose removal moves the interpolant by less than the
    /// local tolerance.
    Prune,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap `h ≤ ρ·max(t, 1)`.
    pub max_step_ratio: f64,
    pub initial_step: f64,
    pub t_end: f64,
    pub thinning: Thinning,
    /// Hard limit on attempted steps.
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_step_ratio: 0.05,
            initial_step: 1e-3,
            t_end: 100.0,
            thinning: Thinning::Off,
            max_steps: 2_000_000_000,
        }
    }
}

impl SolverConfig {
    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_pruning(mut self) -> Self {
        self.thinning = Thinning::Prune;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step_ratio > 0.0
            && self.initial_step > 0.0
            && self.t_end > 0.0
            && self.t_end.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "solver requires positive tolerances, step ratio, initial step and finite t_end > 0 ({self:?})"
            )))
        }
    }
}
