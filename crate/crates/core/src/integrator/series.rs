use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::trajectory::Trajectory;
use crate::error::Result;
use crate::nonlinearity::NonlinearitySpec;
use crate::serde_ext::fmt_f64;
use crate::sigma::SigmaSpec;

/// Default density of [`observable_series`], in rows per decade of `t`.
pub const ROWS_PER_DECADE: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableRow {
    pub t: f64,
    pub x: f64,
    pub log_x: f64,
    /// `log g(x)` evaluated in log space.
    pub log_g_x: f64,
    /// `G(x)`; NaN where `G` saturates.
    pub big_g_x: f64,
    /// `I(t)`; NaN without σ.
    pub i_t: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ObservableSeries {
    pub rows: Vec<ObservableRow>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,x,log_x,log_g_x,G_x,I_t")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.x),
                fmt_f64(r.log_x),
                fmt_f64(r.log_g_x),
                fmt_f64(r.big_g_x),
                fmt_f64(r.i_t)
            )?;
        }
        Ok(())
    }
}

/// Per-node observables, thinned log-uniformly to about 200 rows per decade.
pub fn observable_series(traj: &Trajectory, sigma: Option<&SigmaSpec>, nonlin: &NonlinearitySpec) -> ObservableSeries {
    observable_series_with(traj, sigma, nonlin, ROWS_PER_DECADE)
}

pub fn observable_series_with(
    traj: &Trajectory,
    sigma: Option<&SigmaSpec>,
    nonlin: &NonlinearitySpec,
    rows_per_decade: f64,
) -> ObservableSeries {
    let sigma = sigma.filter(|s| !s.is_unused());
    let (ts, xs) = (traj.times(), traj.values());
    let n = ts.len();
    let spacing = 1.0 / rows_per_decade;
    let mut last_kept = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for i in 0..n {
        let t = ts[i];
        let lt = if t > 0.0 { t.log10() } else { f64::NEG_INFINITY };
        let keep = i == 0 || i + 1 == n || (t > 0.0 && lt - last_kept >= spacing) || last_kept == f64::NEG_INFINITY;
        if !keep {
            continue;
        }
        if t > 0.0 {
            last_kept = lt;
        }
        let x = xs[i];
        rows.push(ObservableRow {
            t,
            x,
            log_x: x.ln(),
            log_g_x: nonlin.log_g(x).unwrap_or(f64::NAN),
            big_g_x: nonlin.big_g(x).unwrap_or(f64::NAN),
            i_t: sigma.and_then(|s| s.integral(t).ok()).unwrap_or(f64::NAN),
        });
    }
    ObservableSeries { rows }
}
