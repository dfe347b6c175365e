//! Time integration of `v_t + v_xxx = N(t, v)` with the dispersive part
//! handled exactly on the Fourier side.
//!
//! All evolutions in the crate (the full equation, the variable-coefficient
//! linear problem, the linearized equation) share one driver; they differ
//! only in the right-hand side `N`. Stored snapshots carry the time
//! derivative computed from the equation, which lets a [`TimeSeries`] act as
//! a cubic-Hermite interpolant for later runs that need the field at stage
//! times.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyReport};
use crate::error::{Error, Result};
use crate::grid::{Grid, SpectralField};
use crate::lp::LpSymbol;

/// `‖u‖_∞` above which a run is declared numerically failed.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

const CONTOUR_POINTS: usize = 64;
const CONTOUR_SWITCH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Etdrk4,
    ImexCn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid: Grid,
    pub dt: f64,
    pub t_end: f64,
    pub s: f64,
    pub integrator: Integrator,
    pub monitor_stride: usize,
}

impl SolverConfig {
    pub fn new(grid: Grid, dt: f64, t_end: f64, s: f64) -> Result<Self> {
        let cfg = Self {
            grid,
            dt,
            t_end,
            s,
            integrator: Integrator::Etdrk4,
            monitor_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.monitor_stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Result<Self> {
        self.t_end = t_end;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dt = {} must be positive",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.monitor_stride == 0 {
            return Err(Error::InvalidConfig(
                "monitor_stride must be at least 1".into(),
            ));
        }
        LpSymbol::new(self.s)?;
        Ok(())
    }

    pub fn symbol(&self) -> LpSymbol {
        LpSymbol::new(self.s).expect("validated config")
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    pub fn step_count(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }

    fn step_time(&self, k: usize) -> f64 {
        if k >= self.step_count() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

/// A stored state with its time derivative and diagnostics.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub field: SpectralField,
    pub rate: SpectralField,
    pub report: EnergyReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp { t: f64, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

#[derive(Clone, Debug)]
pub struct TimeSeries {
    snapshots: Vec<Snapshot>,
    status: RunStatus,
}

impl TimeSeries {
    pub fn from_snapshots(snapshots: Vec<Snapshot>, status: RunStatus) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InvalidConfig(
                "a time series needs a snapshot".into(),
            ));
        }
        if snapshots.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidConfig("snapshot times must increase".into()));
        }
        Ok(Self { snapshots, status })
    }

    /// A field frozen in time on `[0, t_end]`.
    pub fn constant(field: &SpectralField, t_end: f64, sym: &LpSymbol) -> Self {
        let rate = SpectralField::zeros(*field.grid());
        let e1_0 = energy::e1(field);
        let snap = |t: f64| Snapshot {
            t,
            field: field.clone(),
            rate: rate.clone(),
            report: EnergyReport::compute(field, t, e1_0, sym),
        };
        Self {
            snapshots: vec![snap(0.0), snap(t_end)],
            status: RunStatus::Completed,
        }
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn status(&self) -> &RunStatus {
        &self.status
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn reports(&self) -> Vec<EnergyReport> {
        self.snapshots.iter().map(|s| s.report).collect()
    }

    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("nonempty")
    }

    pub fn grid(&self) -> &Grid {
        self.first().field.grid()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    pub fn covers(&self, start: f64, end: f64) -> bool {
        let (a, b) = self.span();
        let tol = 1e-9 * end.abs().max(1.0);
        a <= start + tol && b >= end - tol
    }

    /// Largest gap between consecutive snapshots.
    pub fn max_spacing(&self) -> f64 {
        self.snapshots
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max)
    }

    /// Cubic Hermite interpolation from stored values and rates.
    pub fn field_at(&self, t: f64) -> Result<SpectralField> {
        let (a, b) = self.span();
        let tol = 1e-9 * b.abs().max(1.0);
        if t < a - tol || t > b + tol {
            return Err(Error::Coverage {
                start: a,
                end: b,
                want_start: t,
                want_end: t,
            });
        }
        let t = t.clamp(a, b);
        let idx = self.snapshots.partition_point(|s| s.t <= t);
        if idx == 0 {
            return Ok(self.snapshots[0].field.clone());
        }
        let left = &self.snapshots[idx - 1];
        if left.t == t || idx == self.snapshots.len() {
            return Ok(left.field.clone());
        }
        let right = &self.snapshots[idx];
        let h = right.t - left.t;
        let x = (t - left.t) / h;
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        Ok(left
            .field
            .scale(h00)
            .axpy(h10 * h, &left.rate)
            .axpy(h01, &right.field)
            .axpy(h11 * h, &right.rate))
    }
}

/// A field-valued function of time.
pub trait TimeField: Send + Sync {
    fn at(&self, t: f64) -> Result<SpectralField>;

    /// Interval on which the field is defined; `None` means all times.
    fn span(&self) -> Option<(f64, f64)> {
        None
    }
}

impl TimeField for SpectralField {
    fn at(&self, _t: f64) -> Result<SpectralField> {
        Ok(self.clone())
    }
}

impl TimeField for TimeSeries {
    fn at(&self, t: f64) -> Result<SpectralField> {
        self.field_at(t)
    }

    fn span(&self) -> Option<(f64, f64)> {
        Some(TimeSeries::span(self))
    }
}

impl<T: TimeField + ?Sized> TimeField for Arc<T> {
    fn at(&self, t: f64) -> Result<SpectralField> {
        (**self).at(t)
    }

    fn span(&self) -> Option<(f64, f64)> {
        (**self).span()
    }
}

/// Adapts a closure `t ↦ field` with an optional domain.
pub struct FnField<F> {
    f: F,
    span: Option<(f64, f64)>,
}

impl<F> FnField<F>
where
    F: Fn(f64) -> Result<SpectralField> + Send + Sync,
{
    pub fn new(f: F, span: Option<(f64, f64)>) -> Self {
        Self { f, span }
    }
}

impl<F> TimeField for FnField<F>
where
    F: Fn(f64) -> Result<SpectralField> + Send + Sync,
{
    fn at(&self, t: f64) -> Result<SpectralField> {
        (self.f)(t)
    }

    fn span(&self) -> Option<(f64, f64)> {
        self.span
    }
}

/// Coefficients of `v_t + a v_x + b_x v + v_xxx = F`; `None` means zero.
#[derive(Default)]
pub struct LinearCoeffs {
    pub a: Option<Box<dyn TimeField>>,
    pub b: Option<Box<dyn TimeField>>,
    pub forcing: Option<Box<dyn TimeField>>,
}

impl LinearCoeffs {
    fn check_coverage(&self, t_end: f64) -> Result<()> {
        for field in [&self.a, &self.b, &self.forcing].into_iter().flatten() {
            if let Some((start, end)) = field.span() {
                let tol = 1e-9 * t_end.max(1.0);
                if start > tol || end < t_end - tol {
                    return Err(Error::Coverage {
                        start,
                        end,
                        want_start: 0.0,
                        want_end: t_end,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Exact Airy flow `v_t + v_xxx = 0`: multiplier `exp(i ξ³ t)`. The
/// Nyquist mode is static, matching the odd-derivative convention.
pub fn airy_propagate(f: &SpectralField, t: f64) -> SpectralField {
    let grid = *f.grid();
    let coeffs = f
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &c)| c * (dispersion(&grid, i) * t).exp())
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

/// Gauge-fixed right side of `u_t + u_xxx = N(u)`:
/// `N(u) = -u u_x + ½ ∂_x^{-1}(u_x²)` with the mean-zero primitive and
/// every product dealiased.
pub fn nonlinearity(u: &SpectralField) -> SpectralField {
    let ux = u.diff(1);
    let transport = u.mul(&ux);
    let source = ux.mul(&ux).primitive();
    source.scale(0.5).axpy(-1.0, &transport)
}

/// Right side of the linearization of [`nonlinearity`] at `u` in
/// direction `w`: `-(u w)_x + ∂_x^{-1}(u_x w_x)`.
pub fn linearized_nonlinearity(u: &SpectralField, w: &SpectralField) -> SpectralField {
    let flux = u.mul(w).diff(1);
    let source = u.diff(1).mul(&w.diff(1)).primitive();
    &source - &flux
}

/// Whether the nonlinear terms are active; `LinearOnly` reduces
/// [`evolve_with`] to the Airy flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    Full,
    LinearOnly,
}

pub fn evolve(u0: &SpectralField, cfg: &SolverConfig) -> Result<TimeSeries> {
    evolve_with(u0, cfg, Dynamics::Full)
}

pub fn evolve_with(
    u0: &SpectralField,
    cfg: &SolverConfig,
    dynamics: Dynamics,
) -> Result<TimeSeries> {
    cfg.validate()?;
    u0.grid().check_same(&cfg.grid)?;
    let rhs = |_: f64, u: &SpectralField| -> Result<SpectralField> {
        Ok(match dynamics {
            Dynamics::Full => nonlinearity(u),
            Dynamics::LinearOnly => SpectralField::zeros(*u.grid()),
        })
    };
    integrate(u0, cfg, &rhs)
}

pub fn evolve_linear(
    v0: &SpectralField,
    coeffs: &LinearCoeffs,
    cfg: &SolverConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    v0.grid().check_same(&cfg.grid)?;
    coeffs.check_coverage(cfg.t_end)?;
    let rhs = |t: f64, v: &SpectralField| -> Result<SpectralField> {
        let mut out = SpectralField::zeros(*v.grid());
        if let Some(a) = &coeffs.a {
            let a = a.at(t)?;
            a.grid().check_same(v.grid())?;
            out = out.axpy(-1.0, &a.mul(&v.diff(1)));
        }
        if let Some(b) = &coeffs.b {
            let b = b.at(t)?;
            b.grid().check_same(v.grid())?;
            out = out.axpy(-1.0, &b.diff(1).mul(v));
        }
        if let Some(f) = &coeffs.forcing {
            let f = f.at(t)?;
            f.grid().check_same(v.grid())?;
            out = &out + &f;
        }
        Ok(out)
    };
    integrate(v0, cfg, &rhs)
}

/// Integrates `w_t + (u w)_x + w_xxx = ∂_x^{-1}(u_x w_x)` along the stored
/// background `u`. The background must span `[0, t_end]` with snapshot
/// spacing no coarser than `monitor_stride · dt`.
pub fn evolve_linearized(
    w0: &SpectralField,
    background: &TimeSeries,
    cfg: &SolverConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    w0.grid().check_same(&cfg.grid)?;
    background.grid().check_same(&cfg.grid)?;
    if !background.covers(0.0, cfg.t_end) {
        let (start, end) = background.span();
        return Err(Error::Coverage {
            start,
            end,
            want_start: 0.0,
            want_end: cfg.t_end,
        });
    }
    let allowed = cfg.monitor_stride as f64 * cfg.dt * (1.0 + 1e-9);
    if background.snapshots().len() > 2 && background.max_spacing() > allowed {
        return Err(Error::InvalidConfig(format!(
            "background snapshot spacing {} exceeds monitor_stride * dt = {}",
            background.max_spacing(),
            allowed
        )));
    }
    let rhs = |t: f64, w: &SpectralField| -> Result<SpectralField> {
        let u = background.field_at(t)?;
        Ok(linearized_nonlinearity(&u, w))
    };
    integrate(w0, cfg, &rhs)
}

type Rhs<'a> = dyn Fn(f64, &SpectralField) -> Result<SpectralField> + 'a;

/// Dispersion symbol `L(ξ) = i ξ³` of `-∂_x³` in slot `i`; zero at Nyquist.
fn dispersion(grid: &Grid, i: usize) -> Complex64 {
    if i == grid.nyquist_index() {
        return Complex64::new(0.0, 0.0);
    }
    let xi = grid.wavenumber(i);
    Complex64::new(0.0, xi * xi * xi)
}

/// ETDRK4 coefficient vectors for one step size.
struct EtdCoeffs {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

fn etd_scalars(z: Complex64) -> [Complex64; 4] {
    // [Q, f1, f2, f3] divided by h, as functions of z = L h
    let one = Complex64::new(1.0, 0.0);
    let eval = |z: Complex64| {
        let ez = z.exp();
        let z3 = z * z * z;
        [
            ((z * 0.5).exp() - one) / z,
            (-4.0 * one - z + ez * (4.0 * one - 3.0 * z + z * z)) / z3,
            (2.0 * one + z + ez * (z - 2.0 * one)) / z3,
            (-4.0 * one - 3.0 * z - z * z + ez * (4.0 * one - z)) / z3,
        ]
    };
    if z.norm() >= CONTOUR_SWITCH {
        return eval(z);
    }
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for k in 0..CONTOUR_POINTS {
        let theta = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / CONTOUR_POINTS as f64;
        let vals = eval(z + Complex64::from_polar(1.0, theta));
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += v;
        }
    }
    acc.map(|a| a / CONTOUR_POINTS as f64)
}

impl EtdCoeffs {
    fn new(grid: &Grid, h: f64) -> Self {
        let n = grid.n();
        let mut out = Self {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for i in 0..n {
            let z = dispersion(grid, i) * h;
            let [q, f1, f2, f3] = etd_scalars(z);
            out.e.push(z.exp());
            out.e2.push((z * 0.5).exp());
            out.q.push(q * h);
            out.f1.push(f1 * h);
            out.f2.push(f2 * h);
            out.f3.push(f3 * h);
        }
        out
    }
}

fn combine(grid: Grid, terms: &[(&[Complex64], &[Complex64])]) -> SpectralField {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.n()];
    for (m, c) in terms {
        for ((out, a), b) in coeffs.iter_mut().zip(m.iter()).zip(c.iter()) {
            *out += a * b;
        }
    }
    SpectralField::from_coeffs(grid, coeffs)
}

fn etdrk4_step(
    v: &SpectralField,
    t: f64,
    h: f64,
    c: &EtdCoeffs,
    rhs: &Rhs,
) -> Result<SpectralField> {
    let grid = *v.grid();
    let nv = rhs(t, v)?;
    let a = combine(grid, &[(&c.e2, v.coeffs()), (&c.q, nv.coeffs())]);
    let na = rhs(t + 0.5 * h, &a)?;
    let b = combine(grid, &[(&c.e2, v.coeffs()), (&c.q, na.coeffs())]);
    let nb = rhs(t + 0.5 * h, &b)?;
    let mix = nb.scale(2.0).axpy(-1.0, &nv);
    let cc = combine(grid, &[(&c.e2, a.coeffs()), (&c.q, mix.coeffs())]);
    let nc = rhs(t + h, &cc)?;
    let nab = &na + &nb;
    let twice_f2: Vec<Complex64> = c.f2.iter().map(|x| x * 2.0).collect();
    Ok(combine(
        grid,
        &[
            (&c.e, v.coeffs()),
            (&c.f1, nv.coeffs()),
            (&twice_f2, nab.coeffs()),
            (&c.f3, nc.coeffs()),
        ],
    ))
}

/// Crank-Nicolson on the dispersion with variable-step Adams-Bashforth 2 on
/// `N`; the first step uses forward Euler for `N`.
fn imex_cn_step(
    v: &SpectralField,
    t: f64,
    h: f64,
    prev: Option<(&SpectralField, f64)>,
    rhs: &Rhs,
) -> Result<(SpectralField, SpectralField)> {
    let grid = *v.grid();
    let nv = rhs(t, v)?;
    let extrap = match prev {
        Some((nprev, hprev)) => {
            let w = h / hprev;
            nv.scale(1.0 + 0.5 * w).axpy(-0.5 * w, nprev)
        }
        None => nv.clone(),
    };
    let coeffs = (0..grid.n())
        .map(|i| {
            let l = dispersion(&grid, i) * h;
            let one = Complex64::new(1.0, 0.0);
            ((one + l * 0.5) * v.coeffs()[i] + extrap.coeffs()[i] * h) / (one - l * 0.5)
        })
        .collect();
    Ok((SpectralField::from_coeffs(grid, coeffs), nv))
}

fn blowup_reason(v: &SpectralField) -> Option<String> {
    if !v.is_finite() {
        return Some("non-finite value".into());
    }
    let sup = v.linf();
    if sup > BLOWUP_THRESHOLD {
        return Some(format!("sup norm {sup:.3e} exceeds {BLOWUP_THRESHOLD:.0e}"));
    }
    None
}

fn snapshot(t: f64, v: &SpectralField, rhs: &Rhs, e1_0: f64, sym: &LpSymbol) -> Result<Snapshot> {
    let rate = rhs(t, v)?.axpy(-1.0, &v.diff(3));
    Ok(Snapshot {
        t,
        field: v.clone(),
        rate,
        report: EnergyReport::compute(v, t, e1_0, sym),
    })
}

fn integrate(v0: &SpectralField, cfg: &SolverConfig, rhs: &Rhs) -> Result<TimeSeries> {
    let sym = cfg.symbol();
    let e1_0 = energy::e1(v0);
    let steps = cfg.step_count();
    let mut snapshots = vec![snapshot(0.0, v0, rhs, e1_0, &sym)?];
    let mut cache: HashMap<u64, EtdCoeffs> = HashMap::new();
    let mut prev_n: Option<(SpectralField, f64)> = None;
    let mut v = v0.clone();
    for k in 0..steps {
        let t = cfg.step_time(k);
        let t_next = cfg.step_time(k + 1);
        let h = t_next - t;
        let next = match cfg.integrator {
            Integrator::Etdrk4 => {
                let c = cache
                    .entry(h.to_bits())
                    .or_insert_with(|| EtdCoeffs::new(&cfg.grid, h));
                etdrk4_step(&v, t, h, c, rhs)?
            }
            Integrator::ImexCn => {
                let prev = prev_n.as_ref().map(|(f, hp)| (f, *hp));
                let (next, nv) = imex_cn_step(&v, t, h, prev, rhs)?;
                prev_n = Some((nv, h));
                next
            }
        };
        if let Some(reason) = blowup_reason(&next) {
            return Ok(TimeSeries {
                snapshots,
                status: RunStatus::BlowUp { t: t_next, reason },
            });
        }
        v = next;
        if (k + 1) % cfg.monitor_stride == 0 || k + 1 == steps {
            snapshots.push(snapshot(t_next, &v, rhs, e1_0, &sym)?);
        }
    }
    Ok(TimeSeries {
        snapshots,
        status: RunStatus::Completed,
    })
}
