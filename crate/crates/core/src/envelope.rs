//! Sharp frequency envelopes, the regularized data `P_{<h} u0` and the
//! convergence study of the regularized solutions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::lp::{self, Band};
use crate::stepper::{self, RunStatus, SolverConfig, TimeSeries};

/// Share of the reference run's energy allowed in the top band before it is
/// flagged as under-resolved.
pub const UNDER_RESOLVED: f64 = 1e-10;

/// Norm in which the band pieces `a_k = ‖P_k u0‖` are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvelopeNorm {
    /// `max(‖·‖_{Ḣ¹}, ‖·‖_{Ḣ^{1+s}})`
    H1H1s { s: f64 },
    /// inhomogeneous `H¹`
    H1,
}

impl EnvelopeNorm {
    pub fn measure(&self, f: &SpectralField) -> f64 {
        match *self {
            EnvelopeNorm::H1H1s { s } => f.hdot(1.0).max(f.hdot(1.0 + s)),
            EnvelopeNorm::H1 => f.l2().hypot(f.hdot(1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub delta: f64,
    pub base: Vec<f64>,
    pub c: Vec<f64>,
    pub norm_kind: EnvelopeNorm,
}

impl Envelope {
    /// `c_k = max_j 2^{-δ|k-j|} a_j`
    pub fn from_base(base: Vec<f64>, delta: f64, norm_kind: EnvelopeNorm) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "envelope slack {delta} must lie in (0, 1)"
            )));
        }
        if base.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidConfig(
                "band norms must be finite and nonnegative".into(),
            ));
        }
        let c = (0..base.len())
            .map(|k| {
                base.iter()
                    .enumerate()
                    .map(|(j, a)| 2f64.powf(-delta * k.abs_diff(j) as f64) * a)
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(Self {
            delta,
            base,
            c,
            norm_kind,
        })
    }

    /// `c_{≥h} = (Σ_{k≥h} c_k²)^{1/2}`; bands past the grid count as zero.
    pub fn c_geq(&self, h: usize) -> f64 {
        self.c.iter().skip(h).map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `c_k`, zero past the last representable band.
    pub fn at(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }
}

/// Band norms `a_k = ‖P_k u0‖` for `k = 0, …, top band`, band 0 being
/// `P_{≤0}`.
pub fn band_norms(u0: &SpectralField, norm_kind: EnvelopeNorm) -> Vec<f64> {
    (0..=lp::top_band(u0.grid()))
        .map(|k| norm_kind.measure(&lp::project(u0, Band::At(k))))
        .collect()
}

pub fn sharp_envelope(u0: &SpectralField, delta: f64, norm_kind: EnvelopeNorm) -> Result<Envelope> {
    Envelope::from_base(band_norms(u0, norm_kind), delta, norm_kind)
}

/// `u0^h = P_{<h} u0`, the multiplier `φ(ξ / 2^{h-1})`. Data already
/// inside the pass band are returned unchanged, bit for bit.
pub fn regularize(u0: &SpectralField, h: u32) -> Result<SpectralField> {
    if h == 0 {
        return Err(Error::InvalidConfig(
            "regularization index h must be at least 1".into(),
        ));
    }
    let band = Band::Leq(h as i32 - 1);
    let grid = u0.grid();
    let inside = u0
        .coeffs()
        .iter()
        .enumerate()
        .all(|(i, c)| *c == Complex64::new(0.0, 0.0) || band.symbol(grid.wavenumber(i)) == 1.0);
    if inside {
        return Ok(u0.clone());
    }
    Ok(lp::project(u0, band))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: u32,
    /// `sup_t ‖u^h - u_ref‖_{Ḣ¹∩Ḣ^{1+s}}`
    pub distance: f64,
    pub c_geq_h: f64,
    /// `distance / c_geq_h`, zero when both vanish.
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub envelope: Envelope,
    pub reference_h: u32,
    /// Top-band share of the reference run's energy, maximized over time.
    pub top_band_share: f64,
    pub under_resolved: bool,
}

impl ConvergenceStudy {
    /// max/min of the nonzero ratios; `None` if fewer than one is nonzero.
    pub fn ratio_spread(&self) -> Option<f64> {
        let nonzero: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.ratio)
            .filter(|r| *r > 0.0)
            .collect();
        let max = nonzero.iter().copied().reduce(f64::max)?;
        let min = nonzero.iter().copied().reduce(f64::min)?;
        Some(max / min)
    }
}

fn top_band_share(run: &TimeSeries) -> f64 {
    let top = lp::top_band(run.grid());
    run.snapshots()
        .iter()
        .map(|s| {
            let total = s.field.l2().powi(2);
            if total == 0.0 {
                0.0
            } else {
                lp::project(&s.field, Band::At(top)).l2().powi(2) / total
            }
        })
        .fold(0.0, f64::max)
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

/// Evolves `P_{<h} u0` for each `h` and compares with the run from
/// `P_{<reference_h} u0`, measuring in `Ḣ¹∩Ḣ^{1+s}` with `s = cfg.s`.
/// The runs are independent and execute in parallel.
pub fn convergence_study(
    u0: &SpectralField,
    h_list: &[u32],
    cfg: &SolverConfig,
    reference_h: u32,
    delta: f64,
) -> Result<ConvergenceStudy> {
    cfg.validate()?;
    u0.grid().check_same(&cfg.grid)?;
    if h_list.iter().any(|&h| h == 0 || h >= reference_h) {
        return Err(Error::InvalidConfig(format!(
            "every h must satisfy 1 <= h < reference_h = {reference_h}"
        )));
    }
    let norm_kind = EnvelopeNorm::H1H1s { s: cfg.s };
    let envelope = sharp_envelope(u0, delta, norm_kind)?;

    let mut all: Vec<u32> = h_list.to_vec();
    all.push(reference_h);
    let runs: Vec<TimeSeries> = all
        .par_iter()
        .map(|&h| completed(stepper::evolve(&regularize(u0, h)?, cfg)?))
        .collect::<Result<_>>()?;
    let (reference, family) = runs.split_last().expect("reference run present");

    let rows = h_list
        .iter()
        .zip(family)
        .map(|(&h, run)| {
            let distance = run
                .snapshots()
                .iter()
                .zip(reference.snapshots())
                .map(|(a, b)| norm_kind.measure(&(&a.field - &b.field)))
                .fold(0.0, f64::max);
            let c_geq_h = envelope.c_geq(h as usize);
            let ratio = if distance == 0.0 {
                0.0
            } else {
                distance / c_geq_h
            };
            ConvergenceRow {
                h,
                distance,
                c_geq_h,
                ratio,
            }
        })
        .collect();
    let share = top_band_share(reference);
    Ok(ConvergenceStudy {
        rows,
        envelope,
        reference_h,
        top_band_share: share,
        under_resolved: share > UNDER_RESOLVED,
    })
}
