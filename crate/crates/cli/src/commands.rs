use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fde_decay::asymptotics::{lambda_sequence_gaps, SummaryRow};
use fde_decay::integrator::{observable_series_with, Diagnostics};
use fde_decay::serde_ext::fmt_f64;
use fde_decay::{
    capital_lambda, check_sigma_conditions, classify_for, classify_ode, estimate_rate, integrate, lambda_sequence,
    Error, ProblemSpec, RateEstimate, RegimeReport, ScenarioConfig, SigmaSpec, Trajectory,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::Common;

pub const OUT_ENV: &str = "FDE_DECAY_OUT";

/// Integration stopped early; partial outputs were written.
#[derive(Debug)]
pub struct StalledError(pub String);

impl fmt::Display for StalledError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for StalledError {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    let stalled = e.chain().any(|c| {
        c.downcast_ref::<StalledError>().is_some() || matches!(c.downcast_ref::<Error>(), Some(Error::Stalled { .. }))
    });
    if stalled {
        2
    } else {
        1
    }
}

/// `FDE_DECAY_OUT` wins over `--out`.
fn out_root(cli: Option<&Path>) -> Option<PathBuf> {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
        _ => cli.map(Path::to_path_buf),
    }
}

struct Prepared {
    source: PathBuf,
    cfg: ScenarioConfig,
    problem: ProblemSpec,
    sigma: Option<SigmaSpec>,
    lambda: f64,
    dir: PathBuf,
}

impl Prepared {
    fn report(&self) -> fde_decay::Result<RegimeReport> {
        if self.cfg.validation_mode && self.cfg.b == 0.0 {
            return classify_ode(self.cfg.a, &self.problem.nonlinearity);
        }
        classify_for(self.cfg.a, self.cfg.b, &self.problem.nonlinearity, self.lambda)
    }
}

fn prepare(config: &Path, t_end: Option<f64>, tol: Option<f64>, out: Option<&Path>) -> Result<Prepared> {
    let mut cfg = ScenarioConfig::load(config)?;
    if t_end.is_some() || tol.is_some() {
        if let Some(t) = t_end {
            cfg.solver.t_end = t;
        }
        if let Some(t) = tol {
            cfg.tolerances.rate = t;
            cfg.tolerances.sigma = t;
        }
        // revalidate with the overrides applied
        let source = format!("{} (with overrides)", config.display());
        cfg = ScenarioConfig::parse(&cfg.to_toml_string()?, &source)?;
    }
    let problem = cfg.problem()?;
    let sigma = Some(cfg.sigma_spec(&problem.delay)?).filter(|s| !s.is_unused());
    let lambda = sigma.as_ref().map_or(0.0, |s| s.lambda().value);
    let dir = cfg.output_dir(out_root(out).as_deref());
    Ok(Prepared {
        source: config.to_path_buf(),
        cfg,
        problem,
        sigma,
        lambda,
        dir,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: &'static str,
    config_path: String,
    config: &'a ScenarioConfig,
    tau_bar: f64,
    sigma: Option<&'a SigmaSpec>,
    #[serde(serialize_with = "fde_decay::serde_ext::ext_real")]
    lambda: f64,
    nodes: usize,
    t_final: f64,
    x_final: f64,
    diagnostics: Diagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    stall: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a RegimeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<&'a RateEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a SummaryRow>,
    files: Vec<String>,
}

struct Integrated {
    traj: Trajectory,
    stall: Option<String>,
}

fn integrate_keep_partial(p: &Prepared) -> Result<Integrated> {
    match integrate(&p.problem, &p.cfg.solver) {
        Ok(traj) => Ok(Integrated { traj, stall: None }),
        Err(Error::Stalled { t, step, partial }) => Ok(Integrated {
            traj: *partial,
            stall: Some(format!("integration stalled at t = {t:e} (step {step:e})")),
        }),
        Err(e) => Err(e.into()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{}", SummaryRow::HEADER)?;
    for r in rows {
        r.write_csv(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn summary_text(rows: &[SummaryRow]) -> Result<String> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", SummaryRow::HEADER)?;
    for r in rows {
        r.write_csv(&mut buf)?;
    }
    Ok(String::from_utf8(buf)?)
}

struct RunOutput {
    summary: Option<SummaryRow>,
    dir: PathBuf,
    stall: Option<String>,
}

/// Integrates and writes trajectory, series and manifest; with `estimate`
/// also the rate comparison.
fn run_scenario(p: &Prepared, command: &'static str, estimate: bool) -> Result<RunOutput> {
    fs::create_dir_all(&p.dir).with_context(|| format!("creating {}", p.dir.display()))?;
    let run = integrate_keep_partial(p)?;
    let traj = &run.traj;
    let mut files = Vec::new();

    let path = p.dir.join("trajectory.csv");
    traj.write_csv(&path, p.cfg.outputs.trajectory_every)?;
    files.push("trajectory.csv".to_string());
    if p.cfg.outputs.binary {
        traj.save_binary(&p.dir.join("trajectory.bin"))?;
        files.push("trajectory.bin".to_string());
    }
    let nonlin = &p.problem.nonlinearity;
    let series = observable_series_with(traj, p.sigma.as_ref(), nonlin, p.cfg.outputs.rows_per_decade);
    series.write_csv(&p.dir.join("series.csv"))?;
    files.push("series.csv".to_string());

    let report = match p.report() {
        Ok(r) => Some(r),
        Err(e) if estimate => return Err(e.into()),
        Err(_) => None,
    };

    let mut est = None;
    let mut summary = None;
    if estimate && run.stall.is_none() {
        let rep = report.as_ref().expect("estimate requires a report");
        let e = estimate_rate(&series, rep, nonlin, p.sigma.as_ref())?;
        let row = SummaryRow::new(&p.cfg.id, rep, &e, p.cfg.tolerances.rate);
        write_summary(&p.dir.join("summary.csv"), std::slice::from_ref(&row))?;
        files.push("summary.csv".to_string());
        est = Some(e);
        summary = Some(row);
    }
    files.push("manifest.json".to_string());

    let (t_final, x_final, _) = traj.last();
    let manifest = Manifest {
        tool: "fde-decay",
        version: env!("CARGO_PKG_VERSION"),
        command,
        status: if run.stall.is_some() { "stalled" } else { "ok" },
        config_path: p.source.display().to_string(),
        config: &p.cfg,
        tau_bar: p.problem.delay.tau_bar(),
        sigma: p.sigma.as_ref(),
        lambda: p.lambda,
        nodes: traj.len(),
        t_final,
        x_final,
        diagnostics: traj.diagnostics(),
        stall: run.stall.clone(),
        report: report.as_ref(),
        estimate: est.as_ref(),
        summary: summary.as_ref(),
        files,
    };
    write_json(&p.dir.join("manifest.json"), &manifest)?;
    Ok(RunOutput {
        summary,
        dir: p.dir.clone(),
        stall: run.stall,
    })
}

fn stalled(id: &str, out: &RunOutput) -> Result<()> {
    match &out.stall {
        Some(msg) => Err(StalledError(format!("{id}: {msg}; partial outputs in {}", out.dir.display())).into()),
        None => Ok(()),
    }
}

pub fn simulate(c: &Common) -> Result<()> {
    let p = prepare(&c.config, c.t_end, c.tol, c.out.as_deref())?;
    let out = run_scenario(&p, "simulate", false)?;
    println!("{}", out.dir.display());
    stalled(&p.cfg.id, &out)
}

pub fn classify(c: &Common) -> Result<()> {
    let p = prepare(&c.config, c.t_end, c.tol, c.out.as_deref())?;
    let report = p.report().with_context(|| format!("classifying {}", p.cfg.id))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn sigma_check(c: &Common) -> Result<()> {
    let p = prepare(&c.config, c.t_end, c.tol, c.out.as_deref())?;
    let sigma = match &p.sigma {
        Some(s) => s,
        None => bail!("{}: the delay is bounded or sublinear, so no sigma is used", p.cfg.id),
    };
    let horizon = p.cfg.solver.t_end.max(1e8);
    let report = check_sigma_conditions(sigma, &p.problem.delay, horizon, p.cfg.tolerances.sigma);
    fs::create_dir_all(&p.dir).with_context(|| format!("creating {}", p.dir.display()))?;
    write_json(&p.dir.join("sigma_check.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

pub fn rate(c: &Common) -> Result<()> {
    let p = prepare(&c.config, c.t_end, c.tol, c.out.as_deref())?;
    let out = run_scenario(&p, "rate", true)?;
    stalled(&p.cfg.id, &out)?;
    let rows: Vec<SummaryRow> = out.summary.into_iter().collect();
    print!("{}", summary_text(&rows)?);
    Ok(())
}

pub fn lambda_seq(a: f64, b: f64, q: f64, beta: f64, n: usize) -> Result<()> {
    let big = capital_lambda(a, b, q, beta)?;
    let seq = lambda_sequence(a, b, q, beta, n)?;
    let gaps = lambda_sequence_gaps(a, b, q, beta, n)?;
    let mut out = String::from("n,lambda_n,gap\n");
    for (k, (l, e)) in seq.iter().zip(&gaps).enumerate() {
        out.push_str(&format!("{},{},{}\n", k + 1, fmt_f64(*l), fmt_f64(*e)));
    }
    print!("{out}");
    eprintln!("Lambda = {}", fmt_f64(big));
    Ok(())
}

pub fn sweep(pattern: &str, t_end: Option<f64>, out: Option<PathBuf>, tol: Option<f64>, parallel: usize) -> Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .collect::<std::result::Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no scenario files match {pattern:?}");
    }
    let root = out_root(out.as_deref()).unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build()?;
    let results: Vec<Result<RunOutput>> = pool.install(|| {
        paths
            .par_iter()
            .map(|path| {
                let p = prepare(path, t_end, tol, Some(&root))?;
                let o = run_scenario(&p, "sweep", true)?;
                stalled(&p.cfg.id, &o)?;
                Ok(o)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut worst = 0u8;
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok(o) => rows.extend(o.summary),
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                worst = worst.max(exit_code(&e));
            }
        }
    }
    rows.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
    write_summary(&root.join("summary.csv"), &rows)?;
    print!("{}", summary_text(&rows)?);
    match worst {
        0 => Ok(()),
        2 => Err(StalledError("one or more scenarios stalled".into()).into()),
        _ => bail!("one or more scenarios failed"),
    }
}
