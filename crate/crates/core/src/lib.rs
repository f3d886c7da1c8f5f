//! Decay rates of scalar delay equations
//!
//! ```text
//! x'(t) = −a g(x(t)) + b g(x(t − τ(t)))
//! x'(t) = −a g(x(t)) + b max_{t−τ(t) ≤ s ≤ t} g(x(s))
//! ```
//!
//! with `a > b > 0`, `g` vanishing at zero and unbounded delay. The crate
//! integrates these to long horizons, classifies the decay regime from `a`, `b`,
//! the behaviour of `g` at zero and the growth of `τ`, and compares the
//! predicted rates with the realised ones.

// `!(x > 0.0)` is how parameter checks reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod delay;
pub mod error;
pub mod integrator;
pub mod nonlinearity;
pub mod numeric;
pub mod scenario;
pub mod serde_ext;
pub mod sigma;

pub use asymptotics::{
    build_envelopes, c2_root, capital_lambda, classify, classify_for, classify_ode, estimate_rate, lambda_sequence,
    RateEstimate, Regime, RegimeReport,
};
pub use delay::{DelayFamily, DelaySpec};
pub use error::{Error, Result};
pub use integrator::{integrate, EquationKind, History, ProblemSpec, SolverConfig, Thinning, Trajectory};
pub use nonlinearity::{Family, NonlinearitySpec};
pub use scenario::ScenarioConfig;
pub use sigma::{build_sigma, check_sigma_conditions, lambda_of_sigma, ConditionReport, SigmaForm, SigmaSpec};
