//! Experiment dispatch. Each kind writes its artifacts into a [`RunDir`]
//! and returns summary numbers for the manifest.

use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Map, Value};

use dhs_core::envelope::convergence_study;
use dhs_core::schemes::{
    difference_experiment, linfty_bound_audit, linfty_bound_profile, low_freq_flow,
    picard_horizon_search,
};
use dhs_core::stepper::{
    evolve, evolve_linearized, nonlinearity, RunStatus, SolverConfig, TimeSeries,
};
use dhs_core::store::{field_hash, ExitStatus, Manifest, RunDir};
use dhs_core::SpectralField;

use crate::config::Scenario;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Simulate,
    Conserve,
    Picard,
    Linearized,
    Difference,
    Envelope,
    Flow,
    Audit,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Conserve => "conserve",
            Kind::Picard => "picard",
            Kind::Linearized => "linearized",
            Kind::Difference => "difference",
            Kind::Envelope => "envelope",
            Kind::Flow => "flow",
            Kind::Audit => "audit",
        }
    }
}

/// What an experiment reports back besides the files it wrote.
struct Outcome {
    sentinel: Option<String>,
    results: Map<String, Value>,
}

impl Outcome {
    fn ok(results: Map<String, Value>) -> Self {
        Self {
            sentinel: None,
            results,
        }
    }
}

fn obj(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("summary is an object"),
    }
}

fn blowup(run: &TimeSeries) -> Option<String> {
    match run.status() {
        RunStatus::Completed => None,
        RunStatus::BlowUp { t, reason } => Some(format!("blow-up sentinel at t = {t}: {reason}")),
    }
}

fn max_rel_drift(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let first = values.first().copied().unwrap_or(0.0);
    values
        .iter()
        .map(|v| {
            if first == 0.0 {
                (v - first).abs()
            } else {
                ((v - first) / first).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn max_abs_drift(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let first = values.first().copied().unwrap_or(0.0);
    values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max)
}

/// Energies plus the requested field snapshots of a run.
fn write_series(dir: &mut RunDir, run: &TimeSeries, every: usize) -> Result<(), CliError> {
    dir.energies(&run.reports())?;
    let snaps = run.snapshots();
    for (i, s) in snaps.iter().enumerate() {
        let keep = i == 0 || i + 1 == snaps.len() || (every > 0 && i % every == 0);
        if keep {
            dir.field(&format!("field_{i:05}.bin"), &s.field)?;
        }
    }
    dir.field_csv("final.csv", &run.last().field)?;
    Ok(())
}

fn conservation_summary(run: &TimeSeries) -> Map<String, Value> {
    let r = run.reports();
    obj(json!({
        "t_final": run.last().t,
        "max_rel_drift_e1": max_rel_drift(r.iter().map(|x| x.e1)),
        "max_rel_drift_e2_gauge": max_rel_drift(r.iter().map(|x| x.e2_gauge)),
        "max_rel_drift_e2_uncorrected": max_rel_drift(r.iter().map(|x| x.e2_raw())),
        "max_abs_drift_e_tilde": max_abs_drift(r.iter().map(|x| x.e_tilde)),
    }))
}

fn simulate(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let run = evolve(u0, cfg)?;
    write_series(dir, &run, sc.output.field_every)?;
    let mut results = conservation_summary(&run);
    results.insert("snapshots".into(), json!(run.snapshots().len()));
    Ok(Outcome {
        sentinel: blowup(&run),
        results,
    })
}

fn conserve(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let run = evolve(u0, cfg)?;
    write_series(dir, &run, sc.output.field_every)?;
    Ok(Outcome {
        sentinel: blowup(&run),
        results: conservation_summary(&run),
    })
}

fn picard(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let p = sc.section(&sc.picard, "picard")?;
    let search = picard_horizon_search(u0, cfg, p.tol, p.max_iter, p.max_halvings)?;
    let last = search.attempts.last().expect("at least one attempt");
    dir.json("iteration_report.json", last)?;
    dir.json("attempts.json", &search.attempts)?;
    let mut results = obj(json!({
        "attempts": search.attempts.len(),
        "horizon": last.horizon,
        "converged": last.converged,
        "non_contraction": last.non_contraction,
        "tail_ratio": last.tail_ratio(),
    }));
    let sentinel = match &search.limit {
        Some(limit) => {
            write_series(dir, limit, sc.output.field_every)?;
            results.insert("passing_horizon".into(), json!(last.horizon));
            None
        }
        None => Some(format!(
            "no contracting horizon down to T = {} after {} attempt(s)",
            last.horizon,
            search.attempts.len()
        )),
    };
    Ok(Outcome { sentinel, results })
}

fn linearized(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let l = sc.section(&sc.linearized, "linearized")?;
    let background = evolve(u0, cfg)?;
    if let Some(msg) = blowup(&background) {
        dir.energies(&background.reports())?;
        return Ok(Outcome {
            sentinel: Some(msg),
            results: Map::new(),
        });
    }
    let w0 = if l.direction == "rate" {
        &nonlinearity(u0) - &u0.derivative(3)?
    } else {
        sc.resolve(&l.direction)?
    };
    let w = evolve_linearized(&w0, &background, cfg)?;
    dir.energies(&background.reports())?;
    dir.field("w_final.bin", &w.last().field)?;
    let rows: Vec<Value> = w
        .snapshots()
        .iter()
        .map(|s| json!({"t": s.t, "linf": s.field.linf(), "h1": s.field.hdot(1.0)}))
        .collect();
    dir.json("linearized.json", &rows)?;
    let mut checks = Vec::new();
    for &eps in &l.eps {
        let pert = evolve(&u0.axpy(eps, &w0), cfg)?;
        if let Some(msg) = blowup(&pert) {
            return Ok(Outcome {
                sentinel: Some(msg),
                results: Map::new(),
            });
        }
        let err = pert
            .snapshots()
            .iter()
            .zip(background.snapshots())
            .zip(w.snapshots())
            .map(|((p, b), w)| (&(&p.field - &b.field).scale(1.0 / eps) - &w.field).linf())
            .fold(0.0, f64::max);
        checks.push(json!({"eps": eps, "max_error": err}));
    }
    Ok(Outcome {
        sentinel: blowup(&w),
        results: obj(json!({ "directional_checks": checks })),
    })
}

fn difference(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let d = sc.section(&sc.difference, "difference")?;
    let delta = sc.resolve(&d.direction)?;
    let mut rows = Vec::new();
    for &eps in &d.eps {
        let ratio = difference_experiment(u0, &u0.axpy(eps, &delta), cfg)?;
        rows.push(json!({"eps": eps, "ratio": ratio}));
    }
    dir.json("difference.json", &rows)?;
    Ok(Outcome::ok(obj(json!({ "lipschitz_ratios": rows }))))
}

fn envelope(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let e = sc.section(&sc.envelope, "envelope")?;
    let study = convergence_study(u0, &e.h_list, cfg, e.reference_h, e.delta)?;
    dir.envelope(&study.envelope)?;
    dir.convergence(&study.rows)?;
    Ok(Outcome::ok(obj(json!({
        "ratio_spread": study.ratio_spread(),
        "top_band_share": study.top_band_share,
        "under_resolved": study.under_resolved,
    }))))
}

fn flow(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let background = evolve(u0, cfg)?;
    write_series(dir, &background, sc.output.field_every)?;
    if let Some(msg) = blowup(&background) {
        return Ok(Outcome {
            sentinel: Some(msg),
            results: Map::new(),
        });
    }
    let report = low_freq_flow(&background, cfg)?;
    dir.flow(&report)?;
    let sentinel = (!report.monotone).then(|| "characteristics lost monotonicity".to_string());
    Ok(Outcome {
        sentinel,
        results: obj(json!({"min_qx": report.min_qx(), "monotone": report.monotone})),
    })
}

fn audit(
    sc: &Scenario,
    cfg: &SolverConfig,
    u0: &SpectralField,
    dir: &mut RunDir,
) -> Result<Outcome, CliError> {
    let run = evolve(u0, cfg)?;
    write_series(dir, &run, sc.output.field_every)?;
    let rows: Vec<Value> = linfty_bound_profile(&run)
        .into_iter()
        .map(|(t, r)| json!({"t": t, "ratio": r}))
        .collect();
    dir.json("audit.json", &rows)?;
    Ok(Outcome {
        sentinel: blowup(&run),
        results: obj(json!({"linfty_constant": linfty_bound_audit(&run)})),
    })
}

/// Runs one scenario into `outdir` and returns the process exit code.
/// `manifest.json` is written whenever the directory could be created.
pub fn run_scenario(
    kind: Kind,
    config: &Path,
    outdir: &Path,
    seed: Option<u64>,
    overwrite: bool,
) -> i32 {
    let mut dir = match RunDir::create(outdir, overwrite) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let start = Instant::now();
    let mut manifest = Manifest {
        kind: kind.name().into(),
        config: Value::Null,
        seed: 0,
        u0_hash: None,
        status: ExitStatus::Error,
        message: None,
        wall_time_s: 0.0,
        results: Map::new(),
        files: Vec::new(),
    };
    let result = (|| -> Result<Outcome, CliError> {
        let mut sc = Scenario::load(config)?;
        if let Some(seed) = seed {
            sc.seed = seed;
        }
        manifest.config = serde_json::to_value(&sc).map_err(|e| CliError::Usage(e.to_string()))?;
        manifest.seed = sc.seed;
        let cfg = sc.solver_config()?;
        let u0 = sc.initial_data()?;
        manifest.u0_hash = Some(field_hash(&u0));
        dir.field("u0.bin", &u0)?;
        let f = match kind {
            Kind::Simulate => simulate,
            Kind::Conserve => conserve,
            Kind::Picard => picard,
            Kind::Linearized => linearized,
            Kind::Difference => difference,
            Kind::Envelope => envelope,
            Kind::Flow => flow,
            Kind::Audit => audit,
        };
        f(&sc, &cfg, &u0, &mut dir)
    })();
    let code = match result {
        Ok(out) => {
            manifest.results = out.results;
            match out.sentinel {
                None => {
                    manifest.status = ExitStatus::Ok;
                    0
                }
                Some(msg) => {
                    eprintln!("numerical sentinel: {msg}");
                    manifest.status = ExitStatus::Sentinel;
                    manifest.message = Some(msg);
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            manifest.status = if code == 2 {
                ExitStatus::Sentinel
            } else {
                ExitStatus::Error
            };
            manifest.message = Some(e.to_string());
            code
        }
    };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = dir.finish(manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return 1;
    }
    code
}
