//! Acceptance criteria. Prints one PASS/FAIL line per criterion (with the
//! sub-checks indented below it) and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fde_decay::asymptotics::{capital_lambda_by_root, lambda_sequence_gaps, PredictionKind};
use fde_decay::integrator::observable_series;
use fde_decay::sigma::{Check, Drift};
use fde_decay::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Run {
    cfg: ScenarioConfig,
    problem: ProblemSpec,
    traj: Trajectory,
    sigma: Option<SigmaSpec>,
    report: Option<RegimeReport>,
    est: Option<RateEstimate>,
    secs: f64,
}

fn scenario_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled_scenarios() -> Vec<PathBuf> {
    let mut out = Vec::new();
    for sub in ["acceptance", "examples"] {
        let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_root().join(sub))
            .expect("scenario directory")
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "toml"))
            .collect();
        files.sort();
        out.extend(files);
    }
    out
}

fn load(id: &str) -> ScenarioConfig {
    let path = bundled_scenarios()
        .into_iter()
        .find(|p| p.file_stem().is_some_and(|s| s == id))
        .unwrap_or_else(|| panic!("no bundled scenario {id}"));
    ScenarioConfig::load(&path).unwrap()
}

fn run(cfg: &ScenarioConfig, kind: EquationKind) -> Run {
    let mut cfg = cfg.clone();
    cfg.kind = kind;
    let problem = cfg.problem().unwrap();
    let start = Instant::now();
    let traj = integrate(&problem, &cfg.solver).unwrap_or_else(|e| panic!("{}: {e}", cfg.id));
    let secs = start.elapsed().as_secs_f64();
    let sigma = cfg.sigma_spec(&problem.delay).ok().filter(|s| !s.is_unused());
    let lambda = sigma.as_ref().map_or(0.0, |s| s.lambda().value);
    let report = if cfg.validation_mode {
        None
    } else {
        Some(classify_for(cfg.a, cfg.b, &problem.nonlinearity, lambda).unwrap())
    };
    let est = report.as_ref().map(|r| {
        let series = observable_series(&traj, sigma.as_ref(), &problem.nonlinearity);
        estimate_rate(&series, r, &problem.nonlinearity, sigma.as_ref()).unwrap()
    });
    Run {
        cfg,
        problem,
        traj,
        sigma,
        report,
        est,
        secs,
    }
}

#[derive(Default)]
struct Outcome {
    checks: Vec<(bool, String)>,
}

impl Outcome {
    fn check(&mut self, ok: bool, what: String) {
        self.checks.push((ok, what));
    }

    fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.0)
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn within(v: f64, target: f64, tol: f64) -> bool {
    (v - target).abs() <= tol
}

fn criterion1(r: &Run, o: &mut Outcome) {
    let est = r.est.as_ref().unwrap();
    let rep = r.report.as_ref().unwrap();
    let sec = est.secondary.as_ref().unwrap();
    o.check(
        rep.regime == Regime::I,
        format!("[{}] regime {}", r.cfg.id, rep.regime.as_str()),
    );
    let (lo, hi) = (est.primary.tail_min, est.primary.tail_max);
    o.check(
        within(lo, 1.0, 0.05) && within(hi, 1.0, 0.05),
        format!(
            "[{}] x/G_inv(t) over last decade in [{lo:.4}, {hi:.4}], need within 1 +- 0.05",
            r.cfg.id
        ),
    );
    let (lo, hi) = (sec.tail_min, sec.tail_max);
    o.check(
        within(lo, 1.0, 0.05) && within(hi, 1.0, 0.05),
        format!(
            "[{}] G(x)/t over last decade in [{lo:.4}, {hi:.4}], need within 1 +- 0.05",
            r.cfg.id
        ),
    );
    o.check(r.secs < 10.0, format!("[{}] runtime {:.2} s < 10 s", r.cfg.id, r.secs));
}

fn criterion2(r: &Run, o: &mut Outcome) {
    let est = r.est.as_ref().unwrap();
    let rep = r.report.as_ref().unwrap();
    o.check(
        rep.regime == Regime::III && within(rep.predicted_limit, -0.25, 1e-12),
        format!(
            "[{}] regime {}, predicted {}",
            r.cfg.id,
            rep.regime.as_str(),
            rep.predicted_limit
        ),
    );
    let v = est.tail_value();
    o.check(
        within(v, -0.25, 0.025),
        format!(
            "[{}] tail log x/log t = {v:.5} (spread {:.2e}), need -0.25 +- 0.025",
            r.cfg.id,
            est.tail_spread()
        ),
    );
    o.check(r.secs < 60.0, format!("[{}] runtime {:.2} s < 60 s", r.cfg.id, r.secs));
}

fn criterion3(r: &Run, o: &mut Outcome) {
    let est = r.est.as_ref().unwrap();
    let rep = r.report.as_ref().unwrap();
    let big = capital_lambda(2.0, 0.5, 0.4, 2.0).unwrap();
    o.check(
        rep.regime == Regime::II && within(rep.predicted_limit, big, 1e-12) && within(big, 18.0 / 11.0, 1e-12),
        format!("[{}] regime {}, Lambda = {big}", r.cfg.id, rep.regime.as_str()),
    );
    let (lo, hi) = (est.primary.tail_min, est.primary.tail_max);
    o.check(
        lo >= 0.9 * big,
        format!(
            "[{}] tail min x/G_inv(t) = {lo:.5} >= 0.9 Lambda = {:.5}",
            r.cfg.id,
            0.9 * big
        ),
    );
    o.check(
        hi.is_finite() && hi < 10.0 * big,
        format!("[{}] tail max {hi:.5} < 10 Lambda", r.cfg.id),
    );
    let ode = 1.0 / (2.0 - 0.5);
    o.check(
        lo >= 1.2 * ode,
        format!("[{}] tail min {lo:.5} >= 1.2 (a-b)^-1 = {:.5}", r.cfg.id, 1.2 * ode),
    );
}

fn criterion4(r: &Run, o: &mut Outcome) {
    let est = r.est.as_ref().unwrap();
    let rep = r.report.as_ref().unwrap();
    let pred = -0.5 * 2f64.ln();
    o.check(
        rep.regime == Regime::IV && within(rep.predicted_limit, pred, 1e-12),
        format!("[{}] regime {}, predicted {pred:.6}", r.cfg.id, rep.regime.as_str()),
    );
    let v = est.tail_value();
    o.check(
        within(v, pred, 0.15 * pred.abs()),
        format!(
            "[{}] tail log x/I(t) = {v:.5}, need {pred:.5} +- 15% (decade means {:?}; increment slope {:?}; Aitken {:?})",
            r.cfg.id,
            est.primary.decade_means.iter().map(|d| format!("{:.4}", d.1)).collect::<Vec<_>>(),
            est.primary.increment_slope.map(|s| format!("{s:.5}")),
            est.primary.extrapolated.map(|s| format!("{s:.5}")),
        ),
    );
    o.check(
        est.drift == Some(Drift::Toward),
        format!("[{}] drift over last two decades {:?}", r.cfg.id, est.drift),
    );
}

/// Smallest `x_max(t)/x(t)` over the nodes of the discrete-delay run.
fn dominance(discrete: &Run, max: &Run) -> f64 {
    discrete
        .traj
        .times()
        .iter()
        .zip(discrete.traj.values())
        .map(|(&t, &x)| max.traj.interpolate(t).unwrap() / x)
        .fold(f64::INFINITY, f64::min)
}

fn criterion6(o: &mut Outcome) {
    for id in ["pantograph_q075", "regimeII_q04", "powergap_g05"] {
        let cfg = load(id);
        let delay = DelaySpec::with_horizon(cfg.delay.clone(), 1e8).unwrap();
        let sigma = build_sigma(&delay).unwrap();
        let rep = check_sigma_conditions(&sigma, &delay, 1e8, 0.05);
        o.check(
            rep.all_pass(),
            format!(
                "[{id}] sigma {}: t1 {:?} t2 {:?} t3 {:?} t4 {:?}, lambda {:.6}",
                sigma.name(),
                rep.t1,
                rep.t2,
                rep.t3,
                rep.t4,
                rep.lambda
            ),
        );
    }
    let delay = DelaySpec::constant(1.0).unwrap();
    let sigma = SigmaSpec::linear(1.0, 1.0).unwrap();
    let rep = check_sigma_conditions(&sigma, &delay, 1e8, 0.05);
    let wmax = rep.window_values.iter().map(|w| w.1).fold(f64::NEG_INFINITY, f64::max);
    o.check(
        rep.t3 == Check::Fail && wmax < 0.01,
        format!(
            "[constant delay, linear sigma] t3 {:?}, largest window integral {wmax:.3e} < 0.01",
            rep.t3
        ),
    );
}

fn criterion7(o: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_root = 0.0f64;
    let mut worst_end = 0.0f64;
    let mut bad = Vec::new();
    for _ in 0..100 {
        let beta = rng.gen_range(1.5..4.0);
        let q = rng.gen_range(0.05..0.95);
        let b = rng.gen_range(0.1..2.0);
        let k = (1.0f64 - q).powf(-beta / (beta - 1.0));
        let a = b * k * rng.gen_range(1.2..5.0);
        let big = capital_lambda(a, b, q, beta).unwrap();
        let root = capital_lambda_by_root(a, b, q, beta).unwrap();
        worst_root = worst_root.max(((big - root) / big).abs());
        let seq = lambda_sequence(a, b, q, beta, 500).unwrap();
        let gaps = lambda_sequence_gaps(a, b, q, beta, 500).unwrap();
        let lam1 = a.powf(-1.0 / (beta - 1.0));
        let increasing = gaps.windows(2).all(|w| w[1] < w[0]) && seq.windows(2).all(|w| w[1] >= w[0]);
        let inside = gaps.iter().all(|&e| e > 0.0) && seq.iter().all(|&l| l >= lam1 && l <= big);
        worst_end = worst_end.max(gaps[499]);
        if !(increasing && inside && gaps[499] <= 1e-10) {
            bad.push(format!("(a={a:.4}, b={b:.4}, q={q:.4}, beta={beta:.4})"));
        }
    }
    o.check(
        bad.is_empty(),
        format!(
            "100 random parameter sets: increasing, in [lambda_1, Lambda), |lambda_500 - Lambda| <= 1e-10 (worst {worst_end:.2e}); failures {bad:?}"
        ),
    );
    o.check(
        worst_root <= 1e-10,
        format!("closed form vs polynomial root, worst relative {worst_root:.2e} <= 1e-10"),
    );
}

fn criterion8(runs: &BTreeMap<String, Run>, o: &mut Outcome) {
    let g = NonlinearitySpec::exp_poly(1.0);
    let y: f64 = 1e8;
    let v = g.big_g_inverse(y).unwrap() * y.ln();
    o.check(
        (0.85..=1.15).contains(&v),
        format!("exp_poly: G_inv(1e8) log(1e8) = {v:.4} in [0.85, 1.15]"),
    );
    let v = g.gamma(y).unwrap() * y * y.ln().powi(2);
    o.check(
        (0.85..=1.15).contains(&v),
        format!("exp_poly: Gamma(1e8) 1e8 log^2(1e8) = {v:.4} in [0.85, 1.15]"),
    );
    let y: f64 = 1e-8;
    let l = (1.0 / y).ln();
    let v = g.gamma1(y).unwrap() / (y * l * l);
    o.check(
        within(v, 1.0, 0.1),
        format!("exp_poly: Gamma1(1e-8)/(y log^2(1/y)) = {v:.4} within 1 +- 10%"),
    );
    let d = NonlinearitySpec::double_exp();
    let y: f64 = 1e-12;
    let l = (1.0 / y).ln();
    let v = d.gamma1(y).unwrap() / (y * l * l.ln().powi(2));
    o.check(
        within(v, 1.0, 0.2),
        format!("double_exp: Gamma1(1e-12)/(y log(1/y) loglog^2(1/y)) = {v:.4} within 1 +- 20%"),
    );
    for id in ["exppoly_powergap", "doubleexp_powergap"] {
        let r = &runs[id];
        let sigma = r.sigma.as_ref().unwrap();
        let eps = r.cfg.tolerances.envelope_eps;
        let env = build_envelopes(&r.problem, sigma, eps, None, Some(&r.traj));
        match env {
            Ok(env) => {
                let s = env.check_sandwich(&r.traj).unwrap();
                o.check(
                    s.holds() && eps == 0.2 && r.traj.t_end() >= 1e6,
                    format!(
                        "[{id}] eps {eps}: envelopes from t = {:.1} / {:.1}, {} / {} nodes checked, {} / {} violations, margins {:.3e} / {:.3e}",
                        env.lower_from,
                        env.upper_from,
                        s.lower_checked,
                        s.upper_checked,
                        s.lower_violations,
                        s.upper_violations,
                        s.lower_margin,
                        s.upper_margin
                    ),
                );
            }
            Err(e) => o.check(false, format!("[{id}] envelopes: {e}")),
        }
    }
}

fn g0_check(r: &Run) -> (bool, f64) {
    let g = &r.problem.nonlinearity;
    let x0 = r.traj.values()[0];
    let mut worst = f64::NEG_INFINITY;
    for (&t, &x) in r.traj.times().iter().zip(r.traj.values()) {
        if x >= x0 {
            continue;
        }
        let big = g.big_g_between(x, x0).unwrap();
        worst = worst.max((big - r.problem.a * t) / (r.problem.a * t));
    }
    (worst <= 1e-4, worst)
}

fn criterion9(runs: &BTreeMap<String, Run>, o: &mut Outcome) {
    for r in runs.values() {
        let bound = r.problem.history_max();
        let ok = r.traj.values().iter().all(|&x| x > 0.0 && x <= bound);
        o.check(
            ok,
            format!(
                "[{}] 0 < x <= max psi = {bound} on all {} nodes",
                r.cfg.id,
                r.traj.len()
            ),
        );
        let (ok, worst) = g0_check(r);
        o.check(
            ok,
            format!(
                "[{}] G_0(x(t)) <= a t, worst relative excess {worst:.2e} <= 1e-4",
                r.cfg.id
            ),
        );
    }

    let ode = &runs["ode_baseline"];
    let rel_tol = ode.cfg.solver.rel_tol;
    let a = ode.cfg.a;
    let err = ode
        .traj
        .times()
        .iter()
        .zip(ode.traj.values())
        .map(|(&t, &x)| ((x - 1.0 / (1.0 + a * t)) * (1.0 + a * t)).abs())
        .fold(0.0f64, f64::max);
    o.check(
        err <= rel_tol,
        format!("[ode_baseline] b = 0 closed form, max relative error {err:.2e} <= {rel_tol:e}"),
    );

    for kind in [EquationKind::DiscreteDelay, EquationKind::MaxFunctional] {
        let p = ProblemSpec::new(
            1.5,
            1.5,
            NonlinearitySpec::power_law(2.0),
            DelaySpec::proportional(0.5).unwrap(),
            History::constant(0.3),
        )
        .with_kind(kind)
        .validation();
        let cfg = SolverConfig::default().with_t_end(1e4);
        let tr = integrate(&p, &cfg).unwrap();
        let err = tr
            .values()
            .iter()
            .map(|x| ((x - 0.3) / 0.3).abs())
            .fold(0.0f64, f64::max);
        o.check(
            err <= cfg.rel_tol,
            format!("a = b, {kind:?}: constant solution, max relative deviation {err:.2e}"),
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = NonlinearitySpec::power_law(2.0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (amp, omega, phase) = (
            rng.gen_range(0.1..0.9),
            rng.gen_range(0.5..5.0),
            rng.gen_range(0.0..6.3),
        );
        let f = |t: f64| 1.0 + amp * (omega * t + phase).sin();
        let df = |t: f64| amp * omega * (omega * t + phase).cos();
        let mut t = vec![0.0f64];
        while *t.last().unwrap() < 20.0 {
            let next = t.last().unwrap() + rng.gen_range(0.05..0.4);
            t.push(next.min(20.0));
        }
        let x: Vec<f64> = t.iter().map(|&s| f(s)).collect();
        let d: Vec<f64> = t.iter().map(|&s| df(s)).collect();
        let tr = Trajectory::from_nodes(History::constant(f(0.0)), 1.0, t, x, d).unwrap();
        let lo = rng.gen_range(0.0..15.0);
        let hi = lo + rng.gen_range(0.1..5.0);
        let fast = tr.window_max_g(lo, hi, &g).unwrap();
        let n = 100_000;
        let brute = (0..=n)
            .map(|k| {
                g.g(tr.interpolate(lo + (hi - lo) * k as f64 / n as f64).unwrap())
                    .unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(((fast - brute) / brute).abs());
    }
    o.check(
        worst <= 1e-8,
        format!("window_max_g vs 1e5-sample oracle on 50 random trajectories, worst {worst:.2e} <= 1e-8"),
    );
}

fn main() {
    let mut runs = BTreeMap::new();
    for path in bundled_scenarios() {
        let cfg = ScenarioConfig::load(&path).unwrap();
        let r = run(&cfg, cfg.kind);
        runs.insert(cfg.id.clone(), r);
    }
    let max_runs: BTreeMap<&str, Run> = ["sublinear_sqrt", "pantograph_q075", "powergap_g05"]
        .into_iter()
        .map(|id| (id, run(&runs[id].cfg, EquationKind::MaxFunctional)))
        .collect();

    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let mut o = Outcome::default();
    criterion1(&runs["sublinear_sqrt"], &mut o);
    results.push(("C1 regime I exact rate", o));

    let mut o = Outcome::default();
    criterion2(&runs["pantograph_q075"], &mut o);
    results.push(("C2 regime III pantograph rate", o));

    let mut o = Outcome::default();
    criterion3(&runs["regimeII_q04"], &mut o);
    results.push(("C3 regime II bounds", o));

    let mut o = Outcome::default();
    criterion4(&runs["powergap_g05"], &mut o);
    results.push(("C4 regime IV rate", o));

    let mut o = Outcome::default();
    criterion1(&max_runs["sublinear_sqrt"], &mut o);
    criterion2(&max_runs["pantograph_q075"], &mut o);
    criterion4(&max_runs["powergap_g05"], &mut o);
    for (id, m) in &max_runs {
        let d = &runs[*id];
        let same = d.report.as_ref().map(|r| (r.regime, r.predicted_limit.to_bits()))
            == m.report.as_ref().map(|r| (r.regime, r.predicted_limit.to_bits()));
        o.check(
            same,
            format!("[{id}] max-functional prediction identical to discrete delay"),
        );
        let ratio = dominance(d, m);
        let tol = 5.0 * d.cfg.solver.rel_tol;
        o.check(
            ratio >= 1.0 - tol,
            format!(
                "[{id}] min x_max/x over {} nodes = {ratio:.12}, need >= 1 - {tol:e}",
                d.traj.len()
            ),
        );
    }
    results.push(("C5 max-functional parity", o));

    let mut o = Outcome::default();
    criterion6(&mut o);
    results.push(("C6 sigma-condition certification", o));

    let mut o = Outcome::default();
    criterion7(&mut o);
    results.push(("C7 lambda_n machinery", o));

    let mut o = Outcome::default();
    criterion8(&runs, &mut o);
    results.push(("C8 flat nonlinearities", o));

    let mut o = Outcome::default();
    criterion9(&runs, &mut o);
    results.push(("C9 invariants", o));

    println!();
    for (name, o) in &results {
        println!("{} {name}", mark(o.pass()));
        for (ok, what) in &o.checks {
            println!("    {} {what}", mark(*ok));
        }
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.1.pass()).map(|r| r.0).collect();
    println!();
    for r in runs.values().filter(|r| r.est.is_some()) {
        let (rep, est) = (r.report.as_ref().unwrap(), r.est.as_ref().unwrap());
        let bound = matches!(rep.prediction_kind, PredictionKind::TwoSidedBounds);
        println!(
            "    {:<22} regime {:<3} predicted {:>9.5} estimated {:>9.5}{} ({:.2} s, {} nodes)",
            r.cfg.id,
            rep.regime.as_str(),
            rep.predicted_limit,
            if bound { est.primary.tail_min } else { est.tail_value() },
            if bound { " (tail min)" } else { "" },
            r.secs,
            r.traj.len()
        );
    }
    if failed.is_empty() {
        println!("\nall {} criteria passed", results.len());
    } else {
        println!(
            "\n{} of {} criteria failed: {}",
            failed.len(),
            results.len(),
            failed.join(", ")
        );
        std::process::exit(1);
    }
}
