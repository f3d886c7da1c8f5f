//! Regime classification, predicted limits, and realised-rate estimation.

mod envelope;
mod estimate;
mod lambda;
mod regime;

pub use envelope::{build_envelopes, EnvelopeConstants, Envelopes, SandwichReport, DEFAULT_HORIZON, FIT_MARGIN};
pub use estimate::{estimate_rate, RateEstimate, RatioStats, SummaryRow};
pub use lambda::{c2_root, capital_lambda, capital_lambda_by_root, lambda_sequence, lambda_sequence_gaps};
pub use regime::{
    classify, classify_flat, classify_for, classify_ode, threshold, Normalizer, Observable, Prediction, PredictionKind,
    Regime, RegimeReport,
};
