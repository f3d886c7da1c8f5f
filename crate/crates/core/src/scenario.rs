//! TOML scenario files: one problem, its solver settings, σ choice, output
//! location and pass/fail tolerances.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::delay::{DelayFamily, DelaySpec};
use crate::error::{Error, Result};
use crate::integrator::{EquationKind, History, ProblemSpec, SolverConfig};
use crate::nonlinearity::NonlinearitySpec;
use crate::sigma::{build_sigma, SigmaForm, SigmaSpec};

/// σ used for the rate normalizer and the condition checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaChoice {
    /// Derived from the delay family.
    #[default]
    Auto,
    Linear {
        lambda: f64,
        c: f64,
    },
    TLog {
        kappa: f64,
        c: f64,
    },
    TLogLog {
        kappa: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Defaults to `out/<id>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write every k-th node to the trajectory CSV.
    pub trajectory_every: usize,
    pub rows_per_decade: f64,
    /// Also dump the full trajectory in the binary format.
    pub binary: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: None,
            trajectory_every: 1,
            rows_per_decade: crate::integrator::ROWS_PER_DECADE,
            binary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance on the predicted limit (or lower bound).
    pub rate: f64,
    /// Tolerance for the σ condition checks.
    pub sigma: f64,
    /// ε for the envelope construction.
    pub envelope_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rate: 0.1,
            sigma: 0.05,
            envelope_eps: 0.2,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub kind: EquationKind,
    #[serde(default, skip_serializing_if = "is_false")]
    pub validation_mode: bool,
    pub nonlinearity: NonlinearitySpec,
    pub delay: DelayFamily,
    pub history: History,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sigma: SigmaChoice,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Where in the source a problem was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Loc {
    line: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}", self.line)
    }
}

/// Line of `key` inside `[table]` (or at top level), or of the table header
/// when `key` is absent.
fn locate(text: &str, table: Option<&str>, key: Option<&str>) -> Option<Loc> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if key.is_none() && table == Some(name.as_str()) {
                return Some(Loc { line: i + 1 });
            }
            current = Some(name);
            continue;
        }
        if let Some(k) = key {
            if current.as_deref() == table {
                if let Some((lhs, _)) = line.split_once('=') {
                    if lhs.trim() == k {
                        return Some(Loc { line: i + 1 });
                    }
                }
            }
        }
    }
    None
}

fn config_error(source: &str, text: &str, table: Option<&str>, key: Option<&str>, err: impl fmt::Display) -> Error {
    let loc = locate(text, table, key).or_else(|| table.and_then(|t| locate(text, Some(t), None)));
    let what = match (table, key) {
        (Some(t), Some(k)) => format!("[{t}] {k}"),
        (Some(t), None) => format!("[{t}]"),
        (None, Some(k)) => k.to_string(),
        (None, None) => String::new(),
    };
    match loc {
        Some(l) => Error::Config(format!("{source}:{}: {what}: {err}", l.line)),
        None => Error::Config(format!("{source}: {what}: {err}")),
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; `source` names the file in diagnostics.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            match line {
                Some(l) => Error::Config(format!("{source}:{l}: {}", e.message())),
                None => Error::Config(format!("{source}: {e}")),
            }
        })?;
        cfg.validate_against(text, source)?;
        Ok(cfg)
    }

    fn validate_against(&self, text: &str, source: &str) -> Result<()> {
        let err = |table: Option<&str>, key: Option<&str>, e: Error| config_error(source, text, table, key, e);
        if self.id.is_empty() || self.id.contains(['/', '\\', ',']) {
            return Err(err(
                None,
                Some("id"),
                Error::InvalidParameter(format!("bad scenario id {:?}", self.id)),
            ));
        }
        let ab = if self.validation_mode {
            self.a >= self.b && self.b >= 0.0 && self.a > 0.0
        } else {
            self.a > self.b && self.b > 0.0
        };
        if !ab {
            let key = if self.b <= 0.0 { "b" } else { "a" };
            let need = if self.validation_mode {
                "a >= b >= 0, a > 0"
            } else {
                "a > b > 0"
            };
            return Err(err(
                None,
                Some(key),
                Error::InvalidParameter(format!("requires {need} (got a = {}, b = {})", self.a, self.b)),
            ));
        }
        self.nonlinearity
            .validate()
            .map_err(|e| err(Some("nonlinearity"), None, e))?;
        let delay = self.delay_spec().map_err(|e| err(Some("delay"), None, e))?;
        self.history
            .validate(delay.tau_bar())
            .map_err(|e| err(Some("history"), None, e))?;
        self.solver.validate().map_err(|e| err(Some("solver"), None, e))?;
        self.sigma_spec(&delay).map_err(|e| err(Some("sigma"), None, e))?;
        let t = &self.tolerances;
        if !(t.rate > 0.0 && t.sigma > 0.0 && t.envelope_eps > 0.0 && t.envelope_eps < 1.0) {
            return Err(err(
                Some("tolerances"),
                None,
                Error::InvalidParameter("tolerances must be positive, envelope_eps in (0, 1)".into()),
            ));
        }
        if self.outputs.trajectory_every == 0 || !(self.outputs.rows_per_decade > 0.0) {
            return Err(err(
                Some("outputs"),
                None,
                Error::InvalidParameter("trajectory_every and rows_per_decade must be positive".into()),
            ));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn delay_spec(&self) -> Result<DelaySpec> {
        DelaySpec::with_horizon(self.delay.clone(), self.solver.t_end.max(1e8))
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let mut p = ProblemSpec::new(
            self.a,
            self.b,
            self.nonlinearity.clone(),
            self.delay_spec()?,
            self.history.clone(),
        )
        .with_kind(self.kind);
        p.validation_mode = self.validation_mode;
        p.validate()?;
        Ok(p)
    }

    pub fn sigma_spec(&self, delay: &DelaySpec) -> Result<SigmaSpec> {
        let start = -delay.tau_bar();
        match &self.sigma {
            SigmaChoice::Auto => build_sigma(delay),
            SigmaChoice::Linear { lambda, c } => SigmaSpec::new(SigmaForm::Linear { lambda: *lambda, c: *c }, start),
            SigmaChoice::TLog { kappa, c } => SigmaSpec::new(SigmaForm::TLog { kappa: *kappa, c: *c }, start),
            SigmaChoice::TLogLog { kappa, c } => SigmaSpec::new(SigmaForm::TLogLog { kappa: *kappa, c: *c }, start),
        }
    }

    /// `override_dir/<id>` when given, else `outputs.dir`, else `out/<id>`.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match (override_dir, &self.outputs.dir) {
            (Some(d), _) => d.join(&self.id),
            (None, Some(d)) => d.clone(),
            (None, None) => PathBuf::from("out").join(&self.id),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PANTOGRAPH: &str = r#"
# pantograph, regime III
id = "pantograph_q075"
a = 2.0
b = 1.0

[nonlinearity]
family = "power_law"
beta = 2.0

[delay]
family = "proportional"
q = 0.75

[history]
shape = "constant"
value = 1.0

[solver]
t_end = 1e8
thinning = "prune"

[tolerances]
rate = 0.1
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ScenarioConfig::parse(PANTOGRAPH, "p.toml").unwrap();
        assert_eq!(c.id, "pantograph_q075");
        assert_eq!(c.solver.t_end, 1e8);
        assert_eq!(c.solver.rel_tol, 1e-8);
        assert_eq!(c.sigma, SigmaChoice::Auto);
        let s1 = c.to_toml_string().unwrap();
        let c2 = ScenarioConfig::parse(&s1, "round").unwrap();
        let s2 = c2.to_toml_string().unwrap();
        assert_eq!(s1, s2);
        let p = c.problem().unwrap();
        assert_eq!(p.delay.name(), "proportional");
        let sig = c.sigma_spec(&p.delay).unwrap();
        assert!((sig.lambda().value - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn semantic_errors_point_at_lines() {
        let bad = PANTOGRAPH.replace("a = 2.0", "a = 0.5");
        let e = ScenarioConfig::parse(&bad, "p.toml").unwrap_err().to_string();
        assert!(e.contains("p.toml:4:"), "{e}");
        assert!(e.contains("a > b > 0"), "{e}");
        let bad = PANTOGRAPH.replace("q = 0.75", "q = 1.5");
        let e = ScenarioConfig::parse(&bad, "p.toml").unwrap_err().to_string();
        assert!(e.contains("p.toml:11:"), "{e}");
    }

    #[test]
    fn syntax_errors_point_at_lines() {
        let bad = PANTOGRAPH.replace("beta = 2.0", "beta = 2.0\ngamma = 1.0");
        let e = ScenarioConfig::parse(&bad, "p.toml").unwrap_err().to_string();
        assert!(e.starts_with("config error: p.toml:"), "{e}");
        let bad = PANTOGRAPH.replace("t_end = 1e8", "t_end = ");
        let e = ScenarioConfig::parse(&bad, "p.toml").unwrap_err().to_string();
        assert!(e.contains("p.toml:20:"), "{e}");
    }

    #[test]
    fn explicit_sigma() {
        let s = format!("{PANTOGRAPH}\n[sigma]\nform = \"linear\"\nlambda = 1.3862943611198906\nc = 1.0\n");
        let c = ScenarioConfig::parse(&s, "p.toml").unwrap();
        let p = c.problem().unwrap();
        assert_eq!(c.sigma_spec(&p.delay).unwrap().name(), "linear");
        let s = format!("{PANTOGRAPH}\n[sigma]\nform = \"linear\"\nlambda = -1.0\nc = 1.0\n");
        let e = ScenarioConfig::parse(&s, "p.toml").unwrap_err().to_string();
        assert!(e.contains("[sigma]"), "{e}");
    }

    #[test]
    fn output_dir_precedence() {
        let c = ScenarioConfig::parse(PANTOGRAPH, "p.toml").unwrap();
        assert_eq!(c.output_dir(None), PathBuf::from("out/pantograph_q075"));
        assert_eq!(
            c.output_dir(Some(Path::new("/tmp/x"))),
            PathBuf::from("/tmp/x/pantograph_q075")
        );
    }
}
