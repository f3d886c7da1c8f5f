use serde::Serialize;

use super::lambda::capital_lambda;
use crate::error::{Error, Result};
use crate::nonlinearity::{Family, NonlinearitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    I,
    II,
    III,
    IV,
    /// λ sits exactly on the threshold, where no result applies.
    #[serde(rename = "unclassified")]
    Unclassified,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
            Regime::Unclassified => "unclassified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionKind {
    ExactLimit,
    TwoSidedBounds,
    LogLimit,
}

/// Numerator of the ratio whose limit is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    X,
    BigGX,
    LogX,
    LogGX,
}

impl Observable {
    /// Column name in the observable series.
    pub fn label(&self) -> &'static str {
        match self {
            Observable::X => "x",
            Observable::BigGX => "G_x",
            Observable::LogX => "log_x",
            Observable::LogGX => "log_g_x",
        }
    }
}

/// Denominator of the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// `G⁻¹(t)`
    GInverse,
    /// `t`
    T,
    /// `log t`
    LogT,
    /// `I(t) = ∫_0^t ds/σ(s)`
    SigmaIntegral,
}

impl Normalizer {
    pub fn label(&self) -> &'static str {
        match self {
            Normalizer::GInverse => "G_inv_t",
            Normalizer::T => "t",
            Normalizer::LogT => "log_t",
            Normalizer::SigmaIntegral => "I_t",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Normalizer::GInverse => "t -> G^{-1}(t)",
            Normalizer::T => "t -> t",
            Normalizer::LogT => "t -> log t",
            Normalizer::SigmaIntegral => "t -> I(t) = int_0^t ds/sigma(s)",
        }
    }
}

/// A predicted limit of `observable / normalizer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub observable: Observable,
    pub normalizer: Normalizer,
    pub kind: PredictionKind,
    /// The limit, or the lower bound for two-sided bounds. NaN when only
    /// finiteness is known.
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub value: f64,
    /// Upper bound for two-sided bounds, when one is known.
    #[serde(serialize_with = "crate::serde_ext::ext_real_opt")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub a: f64,
    pub b: f64,
    /// RV index of `g`; absent for the rapidly flat families.
    pub beta: Option<f64>,
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub lambda: f64,
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub threshold: f64,
    pub normalizer: String,
    #[serde(serialize_with = "crate::serde_ext::ext_real")]
    pub predicted_limit: f64,
    pub prediction_kind: PredictionKind,
    pub primary: Prediction,
    /// Companion statement on another observable (`G(x)/t` in regimes I and II).
    pub secondary: Option<Prediction>,
    pub notes: Vec<String>,
}

impl RegimeReport {
    fn new(
        a: f64,
        b: f64,
        beta: Option<f64>,
        lambda: f64,
        threshold: f64,
        regime: Regime,
        primary: Prediction,
    ) -> Self {
        Self {
            regime,
            a,
            b,
            beta,
            lambda,
            threshold,
            normalizer: primary.normalizer.describe().to_string(),
            predicted_limit: primary.value,
            prediction_kind: primary.kind,
            primary,
            secondary: None,
            notes: Vec::new(),
        }
    }
}

fn check_ab(a: f64, b: f64) -> Result<()> {
    if a > b && b > 0.0 && a.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "requires a > b > 0 (got a = {a}, b = {b})"
        )))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "lambda must lie in [0, inf] (got {lambda})"
        )))
    }
}

/// `((β−1)/β)·log(a/b)`.
pub fn threshold(a: f64, b: f64, beta: f64) -> f64 {
    (beta - 1.0) / beta * (a / b).ln()
}

fn unclassified(a: f64, b: f64, beta: Option<f64>, lambda: f64, thr: f64) -> RegimeReport {
    let primary = Prediction {
        observable: Observable::X,
        normalizer: Normalizer::GInverse,
        kind: PredictionKind::TwoSidedBounds,
        value: f64::NAN,
        upper: None,
    };
    let mut r = RegimeReport::new(a, b, beta, lambda, thr, Regime::Unclassified, primary);
    r.notes.push(format!(
        "lambda = {lambda} equals the threshold {thr}; only strict inequalities are covered"
    ));
    r
}

/// Regime of `x' = −a g(x) + b g(x(t−τ(t)))` for `g ∈ RV₀(β)` and
/// `τ(t)/t → 1 − e^{−λ}`.
pub fn classify(a: f64, b: f64, beta: f64, lambda: f64) -> Result<RegimeReport> {
    check_ab(a, b)?;
    check_lambda(lambda)?;
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("requires beta > 1 (got {beta})")));
    }
    let thr = threshold(a, b, beta);
    let ln_ab = (a / b).ln();
    let exact = |observable, normalizer, value| Prediction {
        observable,
        normalizer,
        kind: PredictionKind::ExactLimit,
        value,
        upper: None,
    };
    let log_limit = |normalizer, value| Prediction {
        observable: Observable::LogX,
        normalizer,
        kind: PredictionKind::LogLimit,
        value,
        upper: None,
    };
    let report = if lambda == 0.0 {
        let mut r = RegimeReport::new(
            a,
            b,
            Some(beta),
            lambda,
            thr,
            Regime::I,
            exact(Observable::X, Normalizer::GInverse, (a - b).powf(-1.0 / (beta - 1.0))),
        );
        r.secondary = Some(exact(Observable::BigGX, Normalizer::T, a - b));
        r
    } else if lambda == thr {
        unclassified(a, b, Some(beta), lambda, thr)
    } else if lambda < thr {
        let q = -(-lambda).exp_m1();
        let big = capital_lambda(a, b, q, beta)?;
        let primary = Prediction {
            observable: Observable::X,
            normalizer: Normalizer::GInverse,
            kind: PredictionKind::TwoSidedBounds,
            value: big,
            upper: None,
        };
        let mut r = RegimeReport::new(a, b, Some(beta), lambda, thr, Regime::II, primary);
        r.secondary = Some(Prediction {
            observable: Observable::BigGX,
            normalizer: Normalizer::T,
            kind: PredictionKind::TwoSidedBounds,
            value: f64::NAN,
            upper: Some(big.powf(-(beta - 1.0))),
        });
        r.notes.push(format!(
            "liminf x/G^-1(t) >= Lambda = {big} and limsup is finite; convergence to Lambda is conjectured, not proved"
        ));
        r
    } else if lambda.is_finite() {
        RegimeReport::new(
            a,
            b,
            Some(beta),
            lambda,
            thr,
            Regime::III,
            log_limit(Normalizer::LogT, -ln_ab / (beta * lambda)),
        )
    } else {
        RegimeReport::new(
            a,
            b,
            Some(beta),
            lambda,
            thr,
            Regime::IV,
            log_limit(Normalizer::SigmaIntegral, -ln_ab / beta),
        )
    };
    Ok(report)
}

/// Regime for `g` with `g'∘g⁻¹ ∈ RV₀(1/γ)`, where only `log g(x)` has a
/// computable limit. Below the threshold `log(a/b)/γ` only the finiteness of
/// `G(x)/t` bounds is known.
pub fn classify_flat(a: f64, b: f64, gamma: f64, lambda: f64) -> Result<RegimeReport> {
    check_ab(a, b)?;
    check_lambda(lambda)?;
    if !(gamma >= 1.0) {
        return Err(Error::InvalidParameter(format!("requires gamma >= 1 (got {gamma})")));
    }
    let ln_ab = (a / b).ln();
    let thr = ln_ab / gamma;
    let log_g = |normalizer, value| Prediction {
        observable: Observable::LogGX,
        normalizer,
        kind: PredictionKind::LogLimit,
        value,
        upper: None,
    };
    let report = if lambda == thr {
        unclassified(a, b, None, lambda, thr)
    } else if lambda < thr {
        let primary = Prediction {
            observable: Observable::BigGX,
            normalizer: Normalizer::T,
            kind: PredictionKind::TwoSidedBounds,
            value: f64::NAN,
            upper: None,
        };
        let regime = if lambda == 0.0 { Regime::I } else { Regime::II };
        let mut r = RegimeReport::new(a, b, None, lambda, thr, regime, primary);
        r.notes.push("0 < liminf G(x)/t <= limsup G(x)/t < inf".into());
        r
    } else if lambda.is_finite() {
        RegimeReport::new(
            a,
            b,
            None,
            lambda,
            thr,
            Regime::III,
            log_g(Normalizer::LogT, -ln_ab / lambda),
        )
    } else {
        RegimeReport::new(
            a,
            b,
            None,
            lambda,
            thr,
            Regime::IV,
            log_g(Normalizer::SigmaIntegral, -ln_ab),
        )
    };
    Ok(report)
}

/// Dispatches on the family: [`classify`] for the regularly varying ones,
/// [`classify_flat`] with γ = 1 for `ExpPoly` and `DoubleExp`.
pub fn classify_for(a: f64, b: f64, nonlin: &NonlinearitySpec, lambda: f64) -> Result<RegimeReport> {
    match (&nonlin.family, nonlin.beta()) {
        (Family::ExpPoly { .. } | Family::DoubleExp, _) => classify_flat(a, b, 1.0, lambda),
        (_, Some(beta)) => classify(a, b, beta, lambda),
        _ => Err(Error::Unsupported(format!(
            "no regime theory for nonlinearity {}",
            nonlin.name()
        ))),
    }
}

/// Prediction for the plain ODE `x' = −a g(x)` (`b = 0`), where
/// `G(x(t)) = a t + G(ψ(0))`: regime I with `a − b` replaced by `a`.
pub fn classify_ode(a: f64, nonlin: &NonlinearitySpec) -> Result<RegimeReport> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("requires a > 0 (got {a})")));
    }
    let exact = |observable, normalizer, value| Prediction {
        observable,
        normalizer,
        kind: PredictionKind::ExactLimit,
        value,
        upper: None,
    };
    let beta = nonlin.beta();
    let g_over_t = exact(Observable::BigGX, Normalizer::T, a);
    let mut r = match beta {
        Some(beta) => {
            let primary = exact(Observable::X, Normalizer::GInverse, a.powf(-1.0 / (beta - 1.0)));
            let mut r = RegimeReport::new(a, 0.0, Some(beta), 0.0, f64::INFINITY, Regime::I, primary);
            r.secondary = Some(g_over_t);
            r
        }
        None => RegimeReport::new(a, 0.0, None, 0.0, f64::INFINITY, Regime::I, g_over_t),
    };
    r.notes.push("b = 0: no delayed term".into());
    Ok(r)
}
