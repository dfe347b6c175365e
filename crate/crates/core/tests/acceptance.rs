//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero when a criterion fails that is not listed in `KNOWN_RED`.
//!
//! Run alone with `cargo test -p dhs-core --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use dhs_core::energy::{self, modified_energy_rate};
use dhs_core::envelope::convergence_study;
use dhs_core::lp::{balanced_product, paraproduct_low_high};
use dhs_core::presets::preset_data;
use dhs_core::schemes::{
    difference_experiment, linfty_bound_profile, low_freq_flow, picard_horizon_search,
    CONTRACTION_BOUND, PICARD_TOL,
};
use dhs_core::stepper::{
    airy_propagate, evolve, evolve_linearized, evolve_with, nonlinearity, Dynamics, SolverConfig,
    TimeSeries,
};
use dhs_core::{Grid, LpSymbol, SpectralField};

/// Criteria expected to fail, with the reason recorded in the decisions
/// ledger. A listed criterion that passes is reported but not an error.
const KNOWN_RED: &[u32] = &[4];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn outcome(id: u32, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn grid(n: usize) -> Grid {
    Grid::standard(n).unwrap()
}

fn field(g: Grid, f: impl Fn(f64) -> f64) -> SpectralField {
    SpectralField::from_fn(g, f).unwrap()
}

fn cfg(n: usize, dt: f64, t_end: f64, s: f64) -> SolverConfig {
    SolverConfig::new(grid(n), dt, t_end, s).unwrap()
}

/// Least-squares slope of `log2 err` against `log2 step`.
fn fitted_order(steps: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|h| h.log2()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.log2()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn final_field(u0: &SpectralField, c: &SolverConfig) -> SpectralField {
    let run = evolve(u0, &c.with_stride(usize::MAX >> 1).unwrap()).unwrap();
    assert!(run.status().is_completed());
    run.last().field.clone()
}

// 1. Linear part against the exact Airy flow.
fn c01_linear_oracle() -> Outcome {
    let c = cfg(256, 1e-3, 1.0, 0.75).with_stride(1000).unwrap();
    let g = c.grid;
    let mut worst: f64 = 0.0;
    for (k, phase) in [(1.0, 1.0), (2.0, 8.0)] {
        let u0 = field(g, |x| (k * x).cos());
        let run = evolve_with(&u0, &c, Dynamics::LinearOnly).unwrap();
        let got = &run.last().field;
        let closed = field(g, |x| (k * x + phase).cos());
        worst = worst
            .max((got - &airy_propagate(&u0, 1.0)).linf())
            .max((got - &closed).linf());
    }
    outcome(
        1,
        worst <= 1e-10,
        format!("max error {worst:.2e} (tol 1e-10)"),
    )
}

// 2. Richardson self-convergence of the nonlinear stepper.
fn c02_integrator_order() -> Outcome {
    let g = grid(256);
    let u0 = preset_data("sin", g, 0).unwrap();
    let dt = 1e-2;
    let fields: Vec<SpectralField> = [dt, dt / 2.0, dt / 4.0]
        .par_iter()
        .map(|&h| final_field(&u0, &cfg(256, h, 1.0, 0.75)))
        .collect();
    let e1 = (&fields[0] - &fields[1]).l2();
    let e2 = (&fields[1] - &fields[2]).l2();
    let rate = (e1 / e2).log2();
    outcome(
        2,
        (rate - 4.0).abs() <= 0.2,
        format!(
            "rate {rate:.3} from dt = {dt}, {}, {} (want 4.0 +- 0.2)",
            dt / 2.0,
            dt / 4.0
        ),
    )
}

fn conservation_run() -> TimeSeries {
    let c = cfg(512, 1e-4, 1.0, 0.75).with_stride(100).unwrap();
    let u0 = preset_data("two_mode", c.grid, 0).unwrap();
    evolve(&u0, &c).unwrap()
}

// 3. E₁ drift.
fn c03_e1(run: &TimeSeries) -> Outcome {
    let r = run.reports();
    let drift = r
        .iter()
        .map(|x| ((x.e1 - r[0].e1) / r[0].e1).abs())
        .fold(0.0, f64::max);
    outcome(
        3,
        drift <= 1e-8,
        format!("max relative E1 drift {drift:.2e} (tol 1e-8)"),
    )
}

// 4. Gauge-corrected E₂ drift, and the uncorrected slope against E₁²/(2Λ).
fn c04_e2(run: &TimeSeries) -> Outcome {
    let r = run.reports();
    let e2_0 = r[0].e2_gauge;
    let drift = r
        .iter()
        .map(|x| ((x.e2_gauge - e2_0) / e2_0).abs())
        .fold(0.0, f64::max);
    let raw_drift = r
        .iter()
        .map(|x| ((x.e2_raw() - r[0].e2_raw()) / r[0].e2_raw()).abs())
        .fold(0.0, f64::max);
    let ts: Vec<f64> = r.iter().map(|x| x.t).collect();
    let ys: Vec<f64> = r.iter().map(|x| x.e2_raw()).collect();
    let m = ts.len() as f64;
    let (mt, my) = (ts.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let slope = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (t - mt) * (y - my))
        .sum::<f64>()
        / ts.iter().map(|t| (t - mt) * (t - mt)).sum::<f64>();
    let predicted = r[0].e1 * r[0].e1 / (2.0 * 2.0 * PI);
    let slope_ok = ((slope - predicted) / predicted).abs() <= 0.05;
    outcome(
        4,
        drift <= 1e-6 && slope_ok,
        format!(
            "E2* drift {drift:.2e} (tol 1e-6); uncorrected E2 slope {slope:.2e} vs E1^2/(2L) = {predicted:.3e} \
             (tol 5%); uncorrected E2 drift {raw_drift:.2e}"
        ),
    )
}

// 5. Picard contraction on a measured horizon, and agreement with evolve.
fn c05_picard() -> Outcome {
    let c = cfg(128, 1e-3, 2.0, 0.75);
    let sin = preset_data("sin", c.grid, 0).unwrap();
    let u0 = sin.scale(0.1 / energy::xs_norm(&sin, c.s).unwrap());
    let search = picard_horizon_search(&u0, &c, PICARD_TOL, 60, 8).unwrap();
    let Some(report) = search.passing() else {
        return outcome(5, false, "no horizon contracts".into());
    };
    let limit = search.limit.as_ref().unwrap();
    let at = c.with_t_end(report.horizon).unwrap();
    let direct = final_field(&u0, &at);
    let half = final_field(&u0, &at.with_dt(at.dt / 2.0).unwrap());
    let self_conv = (&direct - &half).hdot(1.0);
    let gap = (&limit.last().field - &direct).hdot(1.0);
    let bound = 10.0 * (PICARD_TOL + self_conv);
    let tail = report.tail_ratio().unwrap_or(0.0);
    outcome(
        5,
        tail <= CONTRACTION_BOUND && gap <= bound,
        format!(
            "T* = {} after {} attempt(s), {} iterates, tail ratio {tail:.3} (tol {CONTRACTION_BOUND}); \
             |limit - evolve|_H1 {gap:.2e} <= {bound:.2e}",
            report.horizon,
            search.attempts.len(),
            report.distances.len()
        ),
    )
}

// 6. Centered difference of Ẽ against the quartic rate.
fn c06_quartic() -> Outcome {
    let dt = 1e-4;
    let c = cfg(256, dt, 0.7, 0.75);
    let sym = c.symbol();
    let u0 = preset_data("two_mode", c.grid, 0).unwrap();
    let run = evolve(&u0, &c).unwrap();
    let snaps = run.snapshots();
    let mid = 5000;
    let exact = modified_energy_rate(&snaps[mid].field, &sym);
    let offsets = [200usize, 100, 50, 25];
    let steps: Vec<f64> = offsets.iter().map(|&k| k as f64 * dt).collect();
    let errs: Vec<f64> = offsets
        .iter()
        .zip(&steps)
        .map(|(&k, h)| {
            let fd = (snaps[mid + k].report.e_tilde - snaps[mid - k].report.e_tilde) / (2.0 * h);
            (fd - exact).abs()
        })
        .collect();
    let rate = fitted_order(&steps, &errs);
    outcome(
        6,
        (rate - 2.0).abs() <= 0.3,
        format!("rate {rate:.3} over h = {steps:?} at t = 0.5 (want 2.0 +- 0.3)"),
    )
}

// 7. Normalized equivalence defect across resolution and amplitude.
fn c07_equivalence() -> Outcome {
    let sym = LpSymbol::new(0.75).unwrap();
    let mut spreads = Vec::new();
    for name in ["two_mode", "gaussian_bump"] {
        let mut values = Vec::new();
        for n in [128, 256, 512] {
            let profile = preset_data(name, grid(n), 0).unwrap();
            for lambda in [0.25, 0.5, 1.0, 2.0] {
                values.push(energy::equivalence_defect(&profile.scale(lambda), &sym).unwrap());
            }
        }
        let max = values.iter().copied().fold(0.0, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        spreads.push((name, min, max));
    }
    let pass = spreads
        .iter()
        .all(|&(_, min, max)| min > 0.0 && max <= 2.0 * min);
    let detail = spreads
        .iter()
        .map(|(name, min, max)| format!("{name}: defect in [{min:.4e}, {max:.4e}]"))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(7, pass, format!("{detail} (max/min <= 2)"))
}

fn time_derivative_error(dt: f64) -> f64 {
    let c = cfg(128, dt, 0.5, 0.75);
    let u0 = preset_data("sin", c.grid, 0).unwrap();
    let bg = evolve(&u0, &c).unwrap();
    let w0 = &nonlinearity(&u0) - &u0.derivative(3).unwrap();
    let w = evolve_linearized(&w0, &bg, &c).unwrap();
    let s = bg.snapshots();
    (1..s.len() - 1)
        .map(|i| {
            let fd = (&s[i + 1].field - &s[i - 1].field).scale(1.0 / (s[i + 1].t - s[i - 1].t));
            (&w.snapshots()[i].field - &fd).linf()
        })
        .fold(0.0, f64::max)
}

// 8. Linearized equation: time-translation and directional derivative.
fn c08_linearized() -> Outcome {
    let steps = [2e-2, 1e-2, 5e-3];
    let errs: Vec<f64> = steps
        .par_iter()
        .map(|&dt| time_derivative_error(dt))
        .collect();
    let rate = fitted_order(&steps, &errs);
    let part_i = (rate - 2.0).abs() <= 0.3;

    let c = cfg(128, 1e-3, 0.5, 0.75).with_stride(1).unwrap();
    let u0 = preset_data("sin", c.grid, 0).unwrap();
    let delta = field(c.grid, |x| (2.0 * x).cos() + 0.5 * (3.0 * x).sin());
    let base = evolve(&u0, &c).unwrap();
    let w = evolve_linearized(&delta, &base, &c).unwrap();
    let eps = [1e-2, 1e-3, 1e-4];
    let dir_errs: Vec<f64> = eps
        .par_iter()
        .map(|&e| {
            let pert = evolve(&u0.axpy(e, &delta), &c).unwrap();
            pert.snapshots()
                .iter()
                .zip(base.snapshots())
                .zip(w.snapshots())
                .map(|((p, b), w)| (&(&p.field - &b.field).scale(1.0 / e) - &w.field).linf())
                .fold(0.0, f64::max)
        })
        .collect();
    let eps_order = fitted_order(&eps, &dir_errs);
    let part_ii = dir_errs.windows(2).all(|w| w[1] < w[0]) && eps_order >= 0.8;
    outcome(
        8,
        part_i && part_ii,
        format!(
            "(i) errors {} over dt = {steps:?}, rate {rate:.3} (want 2.0 +- 0.3); \
             (ii) errors {} over eps = {eps:?}, order {eps_order:.3} (want decreasing, >= 0.8)",
            sci(&errs),
            sci(&dir_errs)
        ),
    )
}

// 9. Lipschitz ratios settle as the perturbation shrinks.
fn c09_lipschitz() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for s in [1.0, 0.75] {
        let c = cfg(128, 1e-3, 0.25, s).with_stride(10).unwrap();
        let u0 = preset_data("sin", c.grid, 0).unwrap();
        let delta = field(c.grid, |x| (2.0 * x).cos());
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .par_iter()
            .map(|&e| difference_experiment(&u0, &u0.axpy(e, &delta), &c).unwrap())
            .collect();
        let settled = ((ratios[2] - ratios[1]) / ratios[2]).abs();
        let shrinking = (ratios[2] - ratios[1]).abs() <= (ratios[1] - ratios[0]).abs();
        let half = c.with_t_end(c.t_end / 2.0).unwrap();
        let r_half = difference_experiment(&u0, &u0.axpy(1e-4, &delta), &half).unwrap();
        let ok = ratios.iter().all(|r| r.is_finite())
            && settled <= 1e-2
            && shrinking
            && r_half <= ratios[2];
        pass &= ok;
        lines.push(format!(
            "s={s}: ratios {ratios:.5?}, last change {settled:.1e} (tol 1e-2), half-horizon {r_half:.5}"
        ));
    }
    outcome(9, pass, lines.join("; "))
}

// 10. Envelope convergence ratios.
fn c10_envelope() -> Outcome {
    let c = cfg(1024, 1e-3, 0.2, 0.75).with_stride(10).unwrap();
    let sigma = 1.0 + c.s + 0.1;
    let u0 = preset_data(&format!("random_decay({sigma})"), c.grid, 7).unwrap();
    let h_list: Vec<u32> = (3..=7).collect();
    let study = convergence_study(&u0, &h_list, &c, 8, 0.5).unwrap();
    let spread = study.ratio_spread().unwrap_or(f64::INFINITY);
    let ratios: Vec<f64> = study.rows.iter().map(|r| r.ratio).collect();
    outcome(
        10,
        spread <= 4.0 && !study.under_resolved,
        format!(
            "ratios {ratios:.3?} for h = 3..7, max/min {spread:.3} (tol 4); reference top-band share {:.1e}",
            study.top_band_share
        ),
    )
}

// 11. Sup-norm growth constant over growing horizons, and the flow.
fn c11_audit() -> Outcome {
    let c = cfg(512, 1e-3, 5.0, 0.75).with_stride(10).unwrap();
    let u0 = preset_data("sin", c.grid, 0).unwrap();
    let run = evolve(&u0, &c).unwrap();
    let profile = linfty_bound_profile(&run);
    let consts: Vec<f64> = (1..=5)
        .map(|t| {
            profile
                .iter()
                .filter(|(s, _)| *s <= t as f64 + 1e-9)
                .map(|(_, r)| *r)
                .fold(0.0, f64::max)
        })
        .collect();
    let trend = consts.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let bounded = consts.iter().all(|x| x.is_finite());
    let flow = low_freq_flow(&run, &c).unwrap();
    let min_qx = flow.min_qx();
    outcome(
        11,
        trend && bounded && flow.monotone && min_qx > 0.0,
        format!(
            "constants for T = 1..5: {consts:.4?}; flow min q_x {min_qx:.4}, monotone {}",
            flow.monotone
        ),
    )
}

// 12. Bony decomposition is exact.
fn c12_bony() -> Outcome {
    let g = grid(256);
    let worst = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let f = preset_data("random_decay(0.8)", g, 2 * seed).unwrap();
            let h = preset_data("random_decay(1.2)", g, 2 * seed + 1).unwrap();
            let sum = &(&paraproduct_low_high(&f, &h).unwrap()
                + &paraproduct_low_high(&h, &f).unwrap())
                + &balanced_product(&f, &h).unwrap();
            let direct = f.product(&h).unwrap();
            (&sum - &direct).linf() / direct.linf()
        })
        .reduce(|| 0.0, f64::max);
    outcome(
        12,
        worst <= 1e-10,
        format!("worst relative error {worst:.2e} over 100 pairs (tol 1e-10)"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let conservation = conservation_run();
    let jobs: Vec<Box<dyn Fn() -> Outcome + Sync>> = vec![
        Box::new(c01_linear_oracle),
        Box::new(c02_integrator_order),
        Box::new(|| c03_e1(&conservation)),
        Box::new(|| c04_e2(&conservation)),
        Box::new(c05_picard),
        Box::new(c06_quartic),
        Box::new(c07_equivalence),
        Box::new(c08_linearized),
        Box::new(c09_lipschitz),
        Box::new(c10_envelope),
        Box::new(c11_audit),
        Box::new(c12_bony),
    ];
    let outcomes: Vec<Outcome> = jobs.par_iter().map(|job| job()).collect();
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_RED.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known, see decisions ledger)",
            (false, false) => "FAIL",
        };
        if !o.pass && !known {
            unexpected += 1;
        }
        println!("criterion {:>2}: {tag}: {}", o.id, o.detail);
    }
    println!(
        "acceptance: {} of {} criteria pass, {unexpected} unexpected failure(s), {:.1}s",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
