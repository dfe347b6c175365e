//! Experiment drivers: the Picard iteration, the difference estimate, the
//! low-frequency characteristic flow and the sup-norm growth audit.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::energy;
use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::lp::{self, Band};
use crate::stepper::{self, FnField, LinearCoeffs, RunStatus, SolverConfig, TimeSeries};

/// Default stopping tolerance for [`picard_solve`].
pub const PICARD_TOL: f64 = 1e-9;

/// Bound on the tail ratios `d_{n+1}/d_n` for a horizon to count as
/// contracting: the geometric factor ½ plus slack.
pub const CONTRACTION_BOUND: f64 = 0.6;

/// Consecutive ratios above 1 after which the iteration is abandoned.
const EXPANSION_RUN: usize = 3;

/// `max(‖f‖_∞, ‖f‖_{Ḣ^σ})`
pub fn linf_hdot(f: &SpectralField, sigma: f64) -> f64 {
    f.linf().max(f.hdot(sigma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub horizon: f64,
    /// `d_n = sup_t ‖u^{n+1} - u^n‖_{L^∞∩Ḣ¹}`
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub converged: bool,
    /// Set when the ratios exceeded 1 on consecutive iterates or a linear
    /// solve hit the blow-up sentinel.
    pub non_contraction: bool,
}

impl IterationReport {
    /// Largest ratio over the second half of the iteration.
    pub fn tail_ratio(&self) -> Option<f64> {
        let skip = self.ratios.len() / 2;
        self.ratios[skip..].iter().copied().reduce(f64::max)
    }

    /// Converged with every tail ratio below `bound`. A run that converges
    /// in one or two iterates has no tail and passes trivially.
    pub fn contracts(&self, bound: f64) -> bool {
        self.converged && !self.non_contraction && self.tail_ratio().is_none_or(|r| r <= bound)
    }
}

/// One step of the iteration: solves
/// `v_t + v_xxx + u^n v_x = ½ ∂_x^{-1}((u^n_x)²)`, `v(0) = u0`.
pub fn picard_map(
    u_prev: &TimeSeries,
    u0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<TimeSeries> {
    let prev = Arc::new(u_prev.clone());
    let span = Some(prev.span());
    let source = {
        let prev = Arc::clone(&prev);
        FnField::new(
            move |t| {
                let ux = prev.field_at(t)?.diff(1);
                Ok(ux.mul(&ux).primitive().scale(0.5))
            },
            span,
        )
    };
    let coeffs = LinearCoeffs {
        a: Some(Box::new(prev)),
        b: None,
        forcing: Some(Box::new(source)),
    };
    stepper::evolve_linear(u0, &coeffs, cfg)
}

/// `sup` over the snapshot times of `next` of `‖next - prev‖_{L^∞∩Ḣ¹}`.
fn iterate_distance(next: &TimeSeries, prev: &TimeSeries) -> Result<f64> {
    let mut d: f64 = 0.0;
    for snap in next.snapshots() {
        let other = prev.field_at(snap.t)?;
        d = d.max(linf_hdot(&(&snap.field - &other), 1.0));
    }
    Ok(d)
}

/// Iterates [`picard_map`] from the time-independent `u^0 = u0`.
pub fn picard_solve(
    u0: &SpectralField,
    cfg: &SolverConfig,
    tol: f64,
    max_iter: usize,
) -> Result<(TimeSeries, IterationReport)> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "tolerance {tol} must be positive"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
    }
    let mut report = IterationReport {
        horizon: cfg.t_end,
        distances: Vec::new(),
        ratios: Vec::new(),
        converged: false,
        non_contraction: false,
    };
    let mut current = TimeSeries::constant(u0, cfg.t_end, &cfg.symbol());
    let mut expanding = 0;
    for _ in 0..max_iter {
        let next = picard_map(&current, u0, cfg)?;
        if !next.status().is_completed() {
            report.non_contraction = true;
            return Ok((next, report));
        }
        let d = iterate_distance(&next, &current)?;
        if let Some(&last) = report.distances.last() {
            let ratio = d / last;
            report.ratios.push(ratio);
            expanding = if ratio > 1.0 { expanding + 1 } else { 0 };
        }
        report.distances.push(d);
        current = next;
        if d < tol {
            report.converged = true;
            break;
        }
        if expanding >= EXPANSION_RUN || !d.is_finite() {
            report.non_contraction = true;
            break;
        }
    }
    Ok((current, report))
}

/// Outcome of halving the horizon until the iteration contracts.
#[derive(Debug)]
pub struct HorizonSearch {
    /// Every attempt, longest horizon first.
    pub attempts: Vec<IterationReport>,
    /// The limit at the largest passing horizon.
    pub limit: Option<TimeSeries>,
}

impl HorizonSearch {
    pub fn passing(&self) -> Option<&IterationReport> {
        self.limit.as_ref().and(self.attempts.last())
    }
}

/// Runs [`picard_solve`] on `cfg.t_end`, halving the horizon up to
/// `max_halvings` times until [`IterationReport::contracts`] holds.
pub fn picard_horizon_search(
    u0: &SpectralField,
    cfg: &SolverConfig,
    tol: f64,
    max_iter: usize,
    max_halvings: usize,
) -> Result<HorizonSearch> {
    let mut attempts = Vec::new();
    let mut horizon = cfg.t_end;
    for _ in 0..=max_halvings {
        let trial = cfg.with_t_end(horizon)?;
        let (limit, report) = picard_solve(u0, &trial, tol, max_iter)?;
        let ok = report.contracts(CONTRACTION_BOUND);
        attempts.push(report);
        if ok {
            return Ok(HorizonSearch {
                attempts,
                limit: Some(limit),
            });
        }
        horizon *= 0.5;
        if horizon < cfg.dt {
            break;
        }
    }
    Ok(HorizonSearch {
        attempts,
        limit: None,
    })
}

fn completed(run: TimeSeries) -> Result<TimeSeries> {
    match run.status() {
        RunStatus::Completed => Ok(run),
        RunStatus::BlowUp { t, reason } => Err(Error::BlowUp {
            t: *t,
            reason: reason.clone(),
        }),
    }
}

/// Measured Lipschitz ratio
/// `sup_t ‖u(t) - v(t)‖_{L^∞∩Ḣ^s} / ‖u0 - v0‖_{L^∞∩Ḣ^s}` with `s = cfg.s`.
/// Coinciding data give 0.
pub fn difference_experiment(
    u0: &SpectralField,
    v0: &SpectralField,
    cfg: &SolverConfig,
) -> Result<f64> {
    u0.grid().check_same(v0.grid())?;
    let initial = linf_hdot(&(u0 - v0), cfg.s);
    if initial == 0.0 {
        return Ok(0.0);
    }
    let u = completed(stepper::evolve(u0, cfg)?)?;
    let v = completed(stepper::evolve(v0, cfg)?)?;
    let sup = u
        .snapshots()
        .iter()
        .zip(v.snapshots())
        .map(|(a, b)| linf_hdot(&(&a.field - &b.field), cfg.s))
        .fold(0.0, f64::max);
    Ok(sup / initial)
}

/// State of the characteristics `q_t = u_{≤0}(t, q)` at one time.
#[derive(Clone, Debug)]
pub struct FlowSample {
    pub t: f64,
    /// `q(t, x_i)` at the grid points, unwrapped (not reduced mod Λ).
    pub q: Vec<f64>,
    pub qx: Vec<f64>,
    /// `sup_x |u_{≤0}(t, q(t, x))|`
    pub sup_u_low: f64,
    pub min_qx: f64,
}

#[derive(Clone, Debug)]
pub struct FlowReport {
    pub samples: Vec<FlowSample>,
    /// False once `q_x ≤ 0` or neighbouring characteristics cross.
    pub monotone: bool,
}

impl FlowReport {
    pub fn min_qx(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.min_qx)
            .fold(f64::INFINITY, f64::min)
    }
}

fn is_monotone(q: &[f64], qx: &[f64], length: f64) -> bool {
    qx.iter().all(|&d| d > 0.0)
        && q.windows(2).all(|w| w[1] > w[0])
        && q[0] + length > *q.last().expect("nonempty")
}

/// Integrates the characteristics of the low-frequency part of the
/// background from the grid points with classical RK4, together with
/// `q_x` through `(q_x)_t = u_{≤0,x}(t, q) q_x`.
pub fn low_freq_flow(background: &TimeSeries, cfg: &SolverConfig) -> Result<FlowReport> {
    cfg.validate()?;
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
    let grid = cfg.grid;
    let low = |t: f64| -> Result<(SpectralField, SpectralField)> {
        let u = lp::project(&background.field_at(t)?, Band::Leq(0));
        let ux = u.diff(1);
        Ok((u, ux))
    };
    // velocity of (q, q_x)
    let velocity = |fields: &(SpectralField, SpectralField), q: &[f64], qx: &[f64]| {
        let dq: Vec<f64> = q.iter().map(|&x| fields.0.evaluate_at(x)).collect();
        let dqx: Vec<f64> = q
            .iter()
            .zip(qx)
            .map(|(&x, &d)| fields.1.evaluate_at(x) * d)
            .collect();
        (dq, dqx)
    };
    let shifted = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + c * k).collect()
    };
    let sample =
        |t: f64, fields: &(SpectralField, SpectralField), q: &[f64], qx: &[f64]| FlowSample {
            t,
            q: q.to_vec(),
            qx: qx.to_vec(),
            sup_u_low: q
                .iter()
                .map(|&x| fields.0.evaluate_at(x).abs())
                .fold(0.0, f64::max),
            min_qx: qx.iter().copied().fold(f64::INFINITY, f64::min),
        };

    let mut q = grid.points();
    let mut qx = vec![1.0; grid.n()];
    let mut monotone = true;
    let mut fields = low(0.0)?;
    let mut samples = vec![sample(0.0, &fields, &q, &qx)];
    let steps = cfg.step_count();
    for k in 0..steps {
        let t = (k as f64 * cfg.dt).min(cfg.t_end);
        let t_next = if k + 1 == steps {
            cfg.t_end
        } else {
            (k + 1) as f64 * cfg.dt
        };
        let h = t_next - t;
        let mid = low(t + 0.5 * h)?;
        let end = low(t_next)?;
        let (k1, l1) = velocity(&fields, &q, &qx);
        let (k2, l2) = velocity(
            &mid,
            &shifted(&q, &k1, 0.5 * h),
            &shifted(&qx, &l1, 0.5 * h),
        );
        let (k3, l3) = velocity(
            &mid,
            &shifted(&q, &k2, 0.5 * h),
            &shifted(&qx, &l2, 0.5 * h),
        );
        let (k4, l4) = velocity(&end, &shifted(&q, &k3, h), &shifted(&qx, &l3, h));
        for i in 0..q.len() {
            q[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            qx[i] += h / 6.0 * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i]);
        }
        fields = end;
        monotone &= is_monotone(&q, &qx, grid.length());
        if (k + 1) % cfg.monitor_stride == 0 || k + 1 == steps {
            samples.push(sample(t_next, &fields, &q, &qx));
        }
    }
    Ok(FlowReport { samples, monotone })
}

/// `‖u(t)‖_∞ / (‖u0‖_{X⁰} + t(E₁ + E₁^{1/2}))` at each stored time, with
/// `E₁` taken from the data.
pub fn linfty_bound_profile(run: &TimeSeries) -> Vec<(f64, f64)> {
    let u0 = &run.first().field;
    let x0 = energy::x0_norm(u0);
    let e1 = energy::e1(u0);
    run.snapshots()
        .iter()
        .map(|s| {
            let denom = x0 + s.t * (e1 + e1.sqrt());
            let ratio = if denom > 0.0 {
                s.field.linf() / denom
            } else {
                0.0
            };
            (s.t, ratio)
        })
        .collect()
}

/// Implied constant of the sup-norm growth bound: the largest value of
/// [`linfty_bound_profile`]. A zero run gives 0.
pub fn linfty_bound_audit(run: &TimeSeries) -> f64 {
    linfty_bound_profile(run)
        .into_iter()
        .map(|(_, r)| r)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::stepper::{evolve, evolve_with, Dynamics};

    fn cfg(n: usize, dt: f64, t_end: f64) -> SolverConfig {
        SolverConfig::new(Grid::standard(n).unwrap(), dt, t_end, 0.75).unwrap()
    }

    fn field(grid: Grid, f: impl Fn(f64) -> f64) -> SpectralField {
        SpectralField::from_fn(grid, f).unwrap()
    }

    #[test]
    fn picard_zero_data_converges_at_once() {
        let c = cfg(32, 0.01, 0.1);
        let zero = SpectralField::zeros(c.grid);
        let (limit, report) = picard_solve(&zero, &c, PICARD_TOL, 10).unwrap();
        assert!(report.converged);
        assert_eq!(report.distances, vec![0.0]);
        assert!(report.ratios.is_empty());
        assert_eq!(limit.last().field.linf(), 0.0);
    }

    #[test]
    fn picard_map_constant_coefficient() {
        // u^n ≡ c: v_t + v_xxx + c v_x = 0, so cos(x) ↦ cos(x - ct + t)
        let c = cfg(32, 1e-3, 0.5);
        let speed = 0.3;
        let prev = TimeSeries::constant(
            &SpectralField::constant(c.grid, speed),
            c.t_end,
            &c.symbol(),
        );
        let u0 = field(c.grid, f64::cos);
        let out = picard_map(&prev, &u0, &c).unwrap();
        let t = c.t_end;
        let want = field(c.grid, |x| (x - speed * t + t).cos());
        assert!((&out.last().field - &want).linf() < 1e-10);
    }

    #[test]
    fn picard_limit_matches_evolve() {
        let c = cfg(64, 1e-3, 0.1);
        let u0 = field(c.grid, |x| 0.1 * x.sin());
        let (limit, report) = picard_solve(&u0, &c, PICARD_TOL, 30).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.contracts(CONTRACTION_BOUND), "{report:?}");
        let direct = evolve(&u0, &c).unwrap();
        let diff = (&limit.last().field - &direct.last().field).hdot(1.0);
        assert!(diff < 1e-8, "{diff}");
    }

    #[test]
    fn long_horizon_is_halved() {
        let c = cfg(64, 5e-3, 2.0);
        let u0 = field(c.grid, |x| 3.0 * x.sin() + 2.0 * (2.0 * x).cos());
        let search = picard_horizon_search(&u0, &c, PICARD_TOL, 40, 6).unwrap();
        assert!(search.attempts.len() > 1);
        assert!(!search.attempts[0].contracts(CONTRACTION_BOUND));
        let pass = search.passing().expect("some horizon contracts");
        assert!(pass.horizon < c.t_end);
    }

    #[test]
    fn difference_of_identical_data_is_zero() {
        let c = cfg(32, 1e-2, 0.1);
        let u0 = field(c.grid, f64::sin);
        assert_eq!(difference_experiment(&u0, &u0, &c).unwrap(), 0.0);
    }

    #[test]
    fn difference_near_zero_is_nearly_isometric() {
        let c = cfg(64, 1e-3, 0.5).with_stride(10).unwrap();
        let zero = SpectralField::zeros(c.grid);
        let v0 = field(c.grid, |x| 1e-6 * (x.sin() + 0.5 * (2.0 * x).cos()));
        // Ḣ¹ dominates and is preserved by the Airy flow
        let mut one = c;
        one.s = 1.0;
        let r = difference_experiment(&zero, &v0, &one).unwrap();
        assert!((r - 1.0).abs() < 1e-4, "{r}");
    }

    #[test]
    fn flow_of_zero_and_constant_backgrounds() {
        let c = cfg(32, 1e-2, 0.5).with_stride(10).unwrap();
        let zero = TimeSeries::constant(&SpectralField::zeros(c.grid), c.t_end, &c.symbol());
        let flow = low_freq_flow(&zero, &c).unwrap();
        assert!(flow.monotone);
        let last = flow.samples.last().unwrap();
        for (q, x) in last.q.iter().zip(c.grid.points()) {
            assert_eq!(*q, x);
        }

        let speed = 0.7;
        let bg = TimeSeries::constant(
            &SpectralField::constant(c.grid, speed),
            c.t_end,
            &c.symbol(),
        );
        let flow = low_freq_flow(&bg, &c).unwrap();
        let last = flow.samples.last().unwrap();
        assert!((last.t - 0.5).abs() < 1e-15);
        for (q, x) in last.q.iter().zip(c.grid.points()) {
            assert!((q - x - speed * 0.5).abs() < 1e-12);
        }
        assert!((last.sup_u_low - speed).abs() < 1e-12);
        assert!((flow.min_qx() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_along_evolved_background_is_monotone() {
        let c = cfg(64, 1e-2, 1.0);
        let u0 = field(c.grid, f64::sin);
        let run = evolve(&u0, &c).unwrap();
        let flow = low_freq_flow(&run, &c).unwrap();
        assert!(flow.monotone);
        assert!(flow.min_qx() > 0.0);
        assert_eq!(flow.samples.len(), 101);
    }

    #[test]
    fn audit_conventions() {
        let c = cfg(64, 1e-2, 1.0).with_stride(10).unwrap();
        let zero = SpectralField::zeros(c.grid);
        assert_eq!(linfty_bound_audit(&evolve(&zero, &c).unwrap()), 0.0);
        let u0 = field(c.grid, f64::cos);
        let run = evolve_with(&u0, &c, Dynamics::LinearOnly).unwrap();
        let r = linfty_bound_audit(&run);
        // at t = 0 the ratio is 1/√π
        assert!((r - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12, "{r}");
        assert!(r <= 1.0);
    }
}
