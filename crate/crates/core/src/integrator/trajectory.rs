use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::history::History;
use super::range_max::RangeMax;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;
use crate::serde_ext::fmt_f64;

const MAGIC: &[u8; 8] = b"FDETRAJ\0";
const FORMAT_VERSION: u32 = 1;

/// Cubic Hermite segment on `[t0, t1]`.
#[derive(Debug, Clone, Copy)]
pub struct Hermite {
    pub t0: f64,
    pub h: f64,
    c: [f64; 4],
}

impl Hermite {
    #[inline]
    pub fn new(t0: f64, x0: f64, d0: f64, t1: f64, x1: f64, d1: f64) -> Self {
        let h = t1 - t0;
        let (hd0, hd1) = (h * d0, h * d1);
        Self {
            t0,
            h,
            c: [x0, hd0, 3.0 * (x1 - x0) - 2.0 * hd0 - hd1, 2.0 * (x0 - x1) + hd0 + hd1],
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let s = (t - self.t0) / self.h;
        let c = &self.c;
        c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    }

    /// Max of the cubic over `[a, b] ⊂ [t0, t0 + h]`, endpoints and interior
    /// critical points included.
    pub fn max_on(&self, a: f64, b: f64) -> f64 {
        let mut m = self.eval(a).max(self.eval(b));
        let (sa, sb) = ((a - self.t0) / self.h, (b - self.t0) / self.h);
        // derivative in s: c1 + 2 c2 s + 3 c3 s²
        let (qa, qb, qc) = (3.0 * self.c[3], 2.0 * self.c[2], self.c[1]);
        let mut check = |s: f64| {
            if s > sa && s < sb {
                let c = &self.c;
                m = m.max(c[0] + s * (c[1] + s * (c[2] + s * c[3])));
            }
        };
        if qa.abs() <= 1e-300 {
            if qb != 0.0 {
                check(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // numerically stable pair of roots
                let q = -0.5 * (qb + qb.signum() * sq);
                if q != 0.0 {
                    check(q / qa);
                    check(qc / q);
                } else {
                    check(0.0);
                }
            }
        }
        m
    }
}

/// Counters collected during integration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    pub rejections: u64,
    pub positivity_rejections: u64,
    pub overlap_halvings: u64,
    pub overlap_iterations: u64,
    pub rhs_evals: u64,
    pub pruned: u64,
    /// Interpolated values that had to be clamped to stay positive.
    pub clamps: u64,
    pub wall_seconds: f64,
}

/// Dense solution: nodes `(tᵢ, xᵢ, x'(tᵢ))` joined by cubic Hermite segments,
/// with the history ψ on `[−τ̄, 0]`.
pub struct Trajectory {
    t: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    history: History,
    tau_bar: f64,
    seg: RangeMax,
    pub diagnostics: Diagnostics,
    clamps: AtomicU64,
}

impl Clone for Trajectory {
    fn clone(&self) -> Self {
        Self {
            t: self.t.clone(),
            x: self.x.clone(),
            d: self.d.clone(),
            history: self.history.clone(),
            tau_bar: self.tau_bar,
            seg: self.seg.clone(),
            diagnostics: self.diagnostics(),
            clamps: AtomicU64::new(self.clamps.load(Ordering::Relaxed)),
        }
    }
}

impl fmt::Debug for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Trajectory")
            .field("nodes", &self.t.len())
            .field("t_end", &self.t_end())
            .field("tau_bar", &self.tau_bar)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    history: History,
    tau_bar: f64,
    diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn new(history: History, tau_bar: f64, x0: f64, d0: f64) -> Self {
        Self {
            t: vec![0.0],
            x: vec![x0],
            d: vec![d0],
            history,
            tau_bar,
            seg: RangeMax::new(),
            diagnostics: Diagnostics::default(),
            clamps: AtomicU64::new(0),
        }
    }

    /// Builds a trajectory from explicit nodes, e.g. sampled from a known function.
    pub fn from_nodes(history: History, tau_bar: f64, t: Vec<f64>, x: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != x.len() || t.len() != d.len() {
            return Err(Error::InvalidParameter(
                "node arrays must be non-empty and of equal length".into(),
            ));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "node times must start at 0 and increase strictly".into(),
            ));
        }
        let mut tr = Self::new(history, tau_bar, x[0], d[0]);
        for i in 1..t.len() {
            tr.push(t[i], x[i], d[i]);
        }
        Ok(tr)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.d
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    pub fn t_end(&self) -> f64 {
        *self.t.last().expect("trajectory has a node at t = 0")
    }

    pub fn last(&self) -> (f64, f64, f64) {
        let n = self.t.len() - 1;
        (self.t[n], self.x[n], self.d[n])
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let mut d = self.diagnostics.clone();
        d.clamps = self.clamps.load(Ordering::Relaxed);
        d
    }

    #[inline]
    fn segment(&self, i: usize) -> Hermite {
        Hermite::new(
            self.t[i],
            self.x[i],
            self.d[i],
            self.t[i + 1],
            self.x[i + 1],
            self.d[i + 1],
        )
    }

    pub(crate) fn set_initial_derivative(&mut self, d0: f64) {
        debug_assert_eq!(self.t.len(), 1);
        self.d[0] = d0;
    }

    pub(crate) fn push(&mut self, t: f64, x: f64, d: f64) {
        self.t.push(t);
        self.x.push(x);
        self.d.push(d);
        let n = self.t.len();
        let m = self.segment(n - 2).max_on(self.t[n - 2], t);
        self.seg.push(m);
    }

    /// Removes the last node. The node at `t = 0` is never removed.
    pub(crate) fn pop(&mut self) -> Option<(f64, f64, f64)> {
        if self.t.len() <= 1 {
            return None;
        }
        self.seg.pop();
        Some((self.t.pop()?, self.x.pop()?, self.d.pop()?))
    }

    /// Index `i` with `tᵢ ≤ t ≤ tᵢ₊₁`; `hint` is tried first.
    #[inline]
    pub(crate) fn locate(&self, t: f64, hint: usize) -> usize {
        let n = self.t.len();
        debug_assert!(n >= 2);
        if hint + 1 < n && self.t[hint] <= t && t <= self.t[hint + 1] {
            return hint;
        }
        if hint + 2 < n && self.t[hint + 1] <= t && t <= self.t[hint + 2] {
            return hint + 1;
        }
        let p = self.t.partition_point(|&ti| ti <= t);
        p.saturating_sub(1).min(n - 2)
    }

    /// Interpolated value without range checks; `hint` carries the last segment used.
    #[inline]
    pub(crate) fn eval_hint(&self, t: f64, hint: &mut usize) -> f64 {
        if t <= 0.0 {
            return self.history.value(t);
        }
        if self.t.len() == 1 {
            return self.x[0];
        }
        let i = self.locate(t, *hint);
        *hint = i;
        let v = if t == self.t[i + 1] {
            self.x[i + 1]
        } else {
            self.segment(i).eval(t)
        };
        if v > 0.0 {
            v
        } else {
            self.clamps.fetch_add(1, Ordering::Relaxed);
            f64::MIN_POSITIVE
        }
    }

    /// `x(t)` for `−τ̄ ≤ t ≤ t_end`: ψ on the history interval, cubic Hermite
    /// between nodes. Values that would not be positive are clamped (and counted).
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * (1.0 + self.t_end().abs());
        if !(t >= -self.tau_bar - slack && t <= self.t_end() + slack) {
            return Err(Error::domain(
                "interpolate",
                format!("t = {t} outside [{}, {}]", -self.tau_bar, self.t_end()),
            ));
        }
        let mut hint = 0;
        Ok(self.eval_hint(t.min(self.t_end()), &mut hint))
    }

    /// Max of the interpolant over `[lo, hi]`.
    pub(crate) fn window_max_x(&self, lo: f64, hi: f64, hint: &mut usize) -> f64 {
        let mut m = f64::NEG_INFINITY;
        if lo < 0.0 {
            m = self.history.max_on(lo, hi.min(0.0));
        }
        if hi <= 0.0 || self.t.len() == 1 {
            return if hi >= 0.0 { m.max(self.x[0]) } else { m };
        }
        let l = lo.max(0.0);
        let i = self.locate(l, *hint);
        *hint = i;
        let j = self.locate(hi, self.t.len() - 2);
        if i == j {
            return m.max(self.segment(i).max_on(l, hi));
        }
        m = m.max(self.segment(i).max_on(l, self.t[i + 1]));
        m = m.max(self.seg.query(i + 1, j));
        m.max(self.segment(j).max_on(self.t[j], hi))
    }

    /// `max_{lo ≤ s ≤ hi} g(x(s))`. Uses the monotonicity of `g` when the
    /// window stays below `δ₁`; otherwise `g` is applied to every candidate.
    pub fn window_max_g(&self, lo: f64, hi: f64, nonlin: &NonlinearitySpec) -> Result<f64> {
        if lo > hi {
            return Err(Error::domain("window_max_g", format!("empty window [{lo}, {hi}]")));
        }
        let slack = 1e-12 * (1.0 + self.t_end().abs());
        if lo < -self.tau_bar - slack || hi > self.t_end() + slack {
            return Err(Error::domain(
                "window_max_g",
                format!("[{lo}, {hi}] not inside [{}, {}]", -self.tau_bar, self.t_end()),
            ));
        }
        let hi = hi.min(self.t_end());
        let mut hint = 0;
        let mx = self.window_max_x(lo, hi, &mut hint);
        if nonlin.monotone_everywhere() || mx <= nonlin.delta1() {
            return nonlin.g(mx);
        }
        self.window_max_g_pointwise(lo, hi, nonlin)
    }

    pub(crate) fn window_max_g_pointwise(&self, lo: f64, hi: f64, nonlin: &NonlinearitySpec) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        let mut consider = |x: f64| -> Result<()> {
            best = best.max(nonlin.g(x.max(0.0))?);
            Ok(())
        };
        if lo < 0.0 {
            let h = hi.min(0.0);
            for k in 0..=256 {
                consider(self.history.value(lo + (h - lo) * k as f64 / 256.0))?;
            }
        }
        if hi > 0.0 && self.t.len() > 1 {
            let l = lo.max(0.0);
            let i = self.locate(l, 0);
            let j = self.locate(hi, i);
            for k in i..=j {
                let seg = self.segment(k);
                let a = l.max(self.t[k]);
                let b = hi.min(self.t[k + 1]);
                consider(seg.eval(a))?;
                consider(seg.eval(b))?;
                consider(seg.max_on(a, b))?;
            }
        }
        Ok(best)
    }

    /// Writes `t,x,dxdt` rows, keeping every `every`-th node plus the last.
    pub fn write_csv(&self, path: &Path, every: usize) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w, every)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W, every: usize) -> Result<()> {
        let every = every.max(1);
        writeln!(w, "t,x,dxdt")?;
        let n = self.t.len();
        for i in (0..n).filter(|i| i % every == 0 || *i == n - 1) {
            writeln!(
                w,
                "{},{},{}",
                fmt_f64(self.t[i]),
                fmt_f64(self.x[i]),
                fmt_f64(self.d[i])
            )?;
        }
        Ok(())
    }

    /// Binary dump: magic, format version, JSON header, then raw little-endian nodes.
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        if matches!(self.history, History::Custom(_)) {
            return Err(Error::Unsupported("binary dump of a custom history".into()));
        }
        let header = serde_json::to_vec(&DumpHeader {
            history: self.history.clone(),
            tau_bar: self.tau_bar,
            diagnostics: self.diagnostics(),
        })
        .map_err(|e| Error::Internal(e.to_string()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        w.write_all(&(self.t.len() as u64).to_le_bytes())?;
        for i in 0..self.t.len() {
            for v in [self.t[i], self.x[i], self.d[i]] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Config(format!("{}: not a trajectory dump", path.display())));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "{}: dump format version {version}, expected {FORMAT_VERSION}",
                path.display()
            )));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let mut header = vec![0u8; u64::from_le_bytes(b8) as usize];
        r.read_exact(&mut header)?;
        let header: DumpHeader =
            serde_json::from_slice(&header).map_err(|e| Error::Config(format!("dump header: {e}")))?;
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let (mut t, mut x, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for _ in 0..n {
            for v in [&mut t, &mut x, &mut d] {
                r.read_exact(&mut b8)?;
                v.push(f64::from_le_bytes(b8));
            }
        }
        let mut tr = Self::from_nodes(header.history, header.tau_bar, t, x, d)?;
        tr.clamps.store(header.diagnostics.clamps, Ordering::Relaxed);
        tr.diagnostics = header.diagnostics;
        Ok(tr)
    }
}
