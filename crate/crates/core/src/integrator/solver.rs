//! Classical RK4 with a first-same-as-last third-order error estimate.
//!
//! The order-3 companion uses weights (1/6, 1/3, 1/3, 0, 1/6) on
//! `(k1, k2, k3, k4, k5)` with `k5 = f(t + h, y₁)`, so the estimate is
//! `h (k4 − k5) / 6` and `k5` doubles as the stored node derivative.

use std::time::Instant;

use super::trajectory::{Hermite, Trajectory};
use super::{EquationKind, ProblemSpec, SolverConfig, Thinning};
use crate::error::{Error, Result};

const MAX_OVERLAP_HALVINGS: u32 = 8;
const MAX_OVERLAP_PASSES: usize = 5;
const PRUNE_BUFFER: usize = 32;
/// Merged interpolant must match the dropped data to this fraction of the local tolerance.
const PRUNE_FRACTION: f64 = 1.0;

/// In-step estimate of `x` used when a delayed argument lands inside the step.
enum Predictor {
    None,
    Linear { t0: f64, x0: f64, d0: f64 },
    Cubic(Hermite),
}

impl Predictor {
    #[inline]
    fn eval(&self, s: f64) -> f64 {
        match self {
            Predictor::None => f64::NAN,
            Predictor::Linear { t0, x0, d0 } => x0 + d0 * (s - t0),
            Predictor::Cubic(h) => h.eval(s),
        }
    }
}

enum StageError {
    /// A stage value or delayed value was not positive; retry smaller.
    NonPositive,
    Fatal(Error),
}

impl From<Error> for StageError {
    fn from(e: Error) -> Self {
        StageError::Fatal(e)
    }
}

struct Rhs<'a> {
    p: &'a ProblemSpec,
    hint: usize,
    evals: u64,
}

impl Rhs<'_> {
    /// `f(ts, ys)` with the current node at `tn`.
    fn eval(&mut self, traj: &Trajectory, tn: f64, ts: f64, ys: f64, pred: &Predictor) -> Result<f64, StageError> {
        self.evals += 1;
        if !(ys > 0.0) {
            return Err(StageError::NonPositive);
        }
        let g = &self.p.nonlinearity;
        let gx = g.g(ys)?;
        if self.p.b == 0.0 {
            return Ok(-self.p.a * gx);
        }
        let s = self.p.delay.gap(ts);
        let delayed = match self.p.kind {
            EquationKind::DiscreteDelay => {
                let xd = if s >= ts {
                    ys
                } else if s <= tn {
                    traj.eval_hint(s, &mut self.hint)
                } else {
                    pred.eval(s)
                };
                if !(xd > 0.0) {
                    return Err(StageError::NonPositive);
                }
                g.g(xd)?
            }
            EquationKind::MaxFunctional => {
                let mut m = gx;
                if s < ts {
                    if s <= tn {
                        let stored = if g.monotone_everywhere() {
                            g.g(traj.window_max_x(s, tn, &mut self.hint))?
                        } else {
                            traj.window_max_g_pointwise(s, tn, g)?
                        };
                        m = m.max(stored);
                    } else {
                        let xp = pred.eval(s);
                        if !(xp > 0.0) {
                            return Err(StageError::NonPositive);
                        }
                        m = m.max(g.g(xp)?);
                    }
                }
                m
            }
        };
        Ok(-self.p.a * gx + self.p.b * delayed)
    }
}

struct StepResult {
    y1: f64,
    k5: f64,
    err: f64,
}

fn rk_step(
    rhs: &mut Rhs,
    traj: &Trajectory,
    t: f64,
    x: f64,
    d: f64,
    h: f64,
    pred: &Predictor,
) -> Result<StepResult, StageError> {
    let k1 = d;
    let th = t + 0.5 * h;
    let k2 = rhs.eval(traj, t, th, x + 0.5 * h * k1, pred)?;
    let k3 = rhs.eval(traj, t, th, x + 0.5 * h * k2, pred)?;
    let k4 = rhs.eval(traj, t, t + h, x + h * k3, pred)?;
    let y1 = x + h / 6.0 * (k1 + 2.0 * (k2 + k3) + k4);
    let k5 = rhs.eval(traj, t, t + h, y1, pred)?;
    Ok(StepResult {
        y1,
        k5,
        err: h / 6.0 * (k4 - k5),
    })
}

/// Error-bounded node pruning state: `anchor` is the last node that must be
/// kept, `dropped` the nodes removed since then (in order).
struct Pruner {
    anchor: usize,
    dropped: Vec<(f64, f64, f64)>,
}

impl Pruner {
    fn after_push(&mut self, traj: &mut Trajectory, abs_tol: f64, rel_tol: f64) -> bool {
        let n = traj.len();
        if n < 3 || n - 2 <= self.anchor {
            return false;
        }
        if self.dropped.len() >= PRUNE_BUFFER {
            self.keep(n - 2);
            return false;
        }
        let (ts, xs, ds) = (traj.times(), traj.values(), traj.derivatives());
        let node = |i: usize| (ts[i], xs[i], ds[i]);
        let k = node(self.anchor);
        let p = node(n - 2);
        let last = node(n - 1);
        let merged = Hermite::new(k.0, k.1, k.2, last.0, last.1, last.2);
        let tol = |v: f64| (abs_tol + rel_tol * v.abs()) * PRUNE_FRACTION;
        let ok = |t: f64, v: f64| (merged.eval(t) - v).abs() <= tol(v);
        // interior nodes first: they are the likeliest to fail
        if !ok(p.0, p.1) || !self.dropped.iter().all(|w| ok(w.0, w.1)) {
            self.keep(n - 2);
            return false;
        }
        let mut prev = k;
        for w in self.dropped.iter().chain([p, last].iter()) {
            let mid = 0.5 * (prev.0 + w.0);
            let v = Hermite::new(prev.0, prev.1, prev.2, w.0, w.1, w.2).eval(mid);
            if !ok(mid, v) {
                self.keep(n - 2);
                return false;
            }
            prev = *w;
        }
        let l = traj.pop().expect("at least three nodes");
        let p = traj.pop().expect("at least two nodes");
        traj.push(l.0, l.1, l.2);
        self.dropped.push(p);
        true
    }

    fn keep(&mut self, idx: usize) {
        self.anchor = idx;
        self.dropped.clear();
    }
}

fn stalled(t: f64, step: f64, traj: Trajectory) -> Error {
    Error::Stalled {
        t,
        step,
        partial: Box::new(traj),
    }
}

/// Integrates `problem` from 0 to `config.t_end`.
pub fn integrate(problem: &ProblemSpec, config: &SolverConfig) -> Result<Trajectory> {
    problem.validate()?;
    config.validate()?;
    let clock = Instant::now();
    let x0 = problem.history.value(0.0);
    let x_max = problem.history_max();
    let t_end = config.t_end;
    let mut traj = Trajectory::new(problem.history.clone(), problem.delay.tau_bar(), x0, 0.0);
    let mut rhs = Rhs {
        p: problem,
        hint: 0,
        evals: 0,
    };
    let d0 = match rhs.eval(&traj, 0.0, 0.0, x0, &Predictor::None) {
        Ok(v) => v,
        Err(StageError::Fatal(e)) => return Err(e),
        Err(StageError::NonPositive) => return Err(Error::InvalidParameter("history is not positive at t = 0".into())),
    };
    traj.set_initial_derivative(d0);

    let (mut t, mut x, mut d) = (0.0f64, x0, d0);
    let mut h = config.initial_step.min(config.max_step_ratio).min(t_end);
    let mut halvings = 0u32;
    let mut last_rejected = false;
    let mut attempts = 0u64;
    let mut pruner = Pruner {
        anchor: 0,
        dropped: Vec::new(),
    };
    let delay = &problem.delay;

    while t < t_end {
        attempts += 1;
        if attempts > config.max_steps {
            traj.diagnostics.rhs_evals = rhs.evals;
            return Err(stalled(t, h, traj));
        }
        h = h.min(config.max_step_ratio * t.max(1.0));
        let remaining = t_end - t;
        let finishing = h * 1.1 >= remaining;
        if finishing {
            h = remaining;
        }
        let h_min = 1e-14 * t.max(1.0);
        if h < h_min {
            traj.diagnostics.rhs_evals = rhs.evals;
            return Err(stalled(t, h, traj));
        }

        let overlap = problem.b != 0.0
            && [0.5, 1.0].iter().any(|c| {
                let ts = t + c * h;
                let s = delay.gap(ts);
                s > t && s < ts
            });
        if overlap && halvings < MAX_OVERLAP_HALVINGS && delay.gap(t) < t {
            h *= 0.5;
            halvings += 1;
            traj.diagnostics.overlap_halvings += 1;
            continue;
        }

        let attempt = if overlap {
            // Fixed-point passes: linear extrapolation first, then the dense
            // output of the previous trial step.
            let mut pred = Predictor::Linear { t0: t, x0: x, d0: d };
            let mut out = None;
            let mut prev_y = f64::NAN;
            for _ in 0..MAX_OVERLAP_PASSES {
                traj.diagnostics.overlap_iterations += 1;
                match rk_step(&mut rhs, &traj, t, x, d, h, &pred) {
                    Ok(r) => {
                        let sc = config.abs_tol + config.rel_tol * r.y1.abs();
                        let settled = (r.y1 - prev_y).abs() <= 1e-2 * sc;
                        prev_y = r.y1;
                        pred = Predictor::Cubic(Hermite::new(t, x, d, t + h, r.y1, r.k5));
                        out = Some(Ok(r));
                        if settled {
                            break;
                        }
                    }
                    Err(e) => {
                        out = Some(Err(e));
                        break;
                    }
                }
            }
            out.expect("at least one pass")
        } else {
            rk_step(&mut rhs, &traj, t, x, d, h, &Predictor::None)
        };

        let r = match attempt {
            Ok(r) => r,
            Err(StageError::NonPositive) => {
                traj.diagnostics.positivity_rejections += 1;
                h *= 0.5;
                last_rejected = true;
                continue;
            }
            Err(StageError::Fatal(e)) => return Err(e),
        };
        if !(r.y1 > config.abs_tol * 1e-3) || r.y1 > x_max || !r.k5.is_finite() {
            traj.diagnostics.positivity_rejections += 1;
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        let sc = config.abs_tol + config.rel_tol * x.abs().max(r.y1.abs());
        let e = r.err.abs() / sc;
        if e <= 1.0 {
            let t_new = if finishing { t_end } else { t + h };
            if !(r.y1 > 0.0) {
                return Err(Error::Internal(format!(
                    "accepted non-positive value {} at t = {t_new}",
                    r.y1
                )));
            }
            traj.push(t_new, r.y1, r.k5);
            if config.thinning == Thinning::Prune && pruner.after_push(&mut traj, config.abs_tol, config.rel_tol) {
                traj.diagnostics.pruned += 1;
            }
            traj.diagnostics.steps += 1;
            t = t_new;
            x = r.y1;
            d = r.k5;
            let mut factor = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.25)).clamp(0.2, 5.0)
            };
            if last_rejected {
                factor = factor.min(1.0);
            }
            h *= factor;
            halvings = 0;
            last_rejected = false;
        } else {
            traj.diagnostics.rejections += 1;
            h *= (0.9 * e.powf(-0.25)).max(0.2);
            last_rejected = true;
        }
    }
    traj.diagnostics.rhs_evals = rhs.evals;
    traj.diagnostics.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(traj)
}
