//! Littlewood-Paley calculus on the grid: smooth dyadic projectors, the
//! weight `A(D) = D^s P_{>0}`, the Bony decomposition of products and the
//! commutators entering the modified energy.
//!
//! Bands are indexed `0..=K`: band 0 is `P_{≤0}` (symbol `φ(ξ)`), band
//! `k ≥ 1` has symbol `ψ_k(ξ) = φ(ξ/2^k) - φ(ξ/2^{k-1})`, and `K` is the
//! smallest index with `2^K` at or above the Nyquist wavenumber so the bands
//! partition unity on the lattice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, SpectralField};

/// Band separation used by the paraproducts: `P_j f · P_k g` is low-high
/// when `j ≤ k - SEPARATION - 1` and balanced when `|j - k| ≤ SEPARATION`.
pub const SEPARATION: i32 = 4;

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `C^∞` transition: 0 for `t ≤ 0`, 1 for `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    let a = bump(t);
    let b = bump(1.0 - t);
    a / (a + b)
}

/// Littlewood-Paley cutoff: 1 on `|ξ| ≤ 1`, 0 on `|ξ| ≥ 2`, smooth and
/// monotone in between.
pub fn phi(xi: f64) -> f64 {
    smooth_step(2.0 - xi.abs())
}

/// `φ(ξ / 2^k)`, the symbol of `P_{≤k}`.
pub fn phi_scaled(xi: f64, k: i32) -> f64 {
    phi(xi / 2f64.powi(k))
}

/// Symbol of band `k` (band 0 is the whole low block `P_{≤0}`).
pub fn psi(xi: f64, k: u32) -> f64 {
    if k == 0 {
        phi(xi)
    } else {
        phi_scaled(xi, k as i32) - phi_scaled(xi, k as i32 - 1)
    }
}

/// Index of the highest band needed to cover the grid.
pub fn top_band(grid: &Grid) -> u32 {
    let mut k = 0u32;
    while 2f64.powi(k as i32) < grid.max_wavenumber() {
        k += 1;
    }
    k
}

/// A frequency region selected by [`project`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    /// `P_{≤k}`
    Leq(i32),
    /// `P_k`
    At(u32),
    /// `P_{>k}`
    Gt(i32),
}

impl Band {
    pub fn symbol(&self, xi: f64) -> f64 {
        match *self {
            Band::Leq(k) => phi_scaled(xi, k),
            Band::At(k) => psi(xi, k),
            Band::Gt(k) => 1.0 - phi_scaled(xi, k),
        }
    }
}

pub fn project(f: &SpectralField, band: Band) -> SpectralField {
    f.apply_real_multiplier(|xi| band.symbol(xi))
}

/// Symbol data for `A(D) = D^s P_{>0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSymbol {
    s: f64,
}

impl LpSymbol {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.5 && s <= 1.0) {
            return Err(Error::ExponentOutOfRange {
                value: s,
                range: "(1/2, 1]",
            });
        }
        Ok(Self { s })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `a(ξ) = |ξ|^s (1 - φ(ξ))`
    pub fn a(&self, xi: f64) -> f64 {
        let high = 1.0 - phi(xi);
        if high == 0.0 {
            0.0
        } else {
            xi.abs().powf(self.s) * high
        }
    }
}

pub fn apply_a(f: &SpectralField, sym: &LpSymbol) -> SpectralField {
    f.apply_real_multiplier(|xi| sym.a(xi))
}

fn band_sum(f: &SpectralField, lo: i32, hi: i32) -> Option<SpectralField> {
    // Σ_{j=lo}^{hi} P_j f with the convention that band 0 is P_{≤0}
    let lo = lo.max(0);
    if hi < lo {
        return None;
    }
    Some(f.apply_real_multiplier(|xi| {
        let upper = phi_scaled(xi, hi);
        let lower = if lo == 0 { 0.0 } else { phi_scaled(xi, lo - 1) };
        upper - lower
    }))
}

fn accumulate(
    grid: Grid,
    terms: impl Iterator<Item = (SpectralField, SpectralField)>,
) -> SpectralField {
    // Bilinear sums are accumulated in physical space and dealiased once.
    let mut acc = vec![0.0; grid.n()];
    for (a, b) in terms {
        for ((s, x), y) in acc.iter_mut().zip(a.samples()).zip(b.samples()) {
            *s += x * y;
        }
    }
    SpectralField::from_samples(grid, acc)
        .expect("finite inputs give finite products")
        .dealias()
}

/// Low-high paraproduct `T_f g = Σ_k P_{<k-4} f · P_k g`.
pub fn paraproduct_low_high(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    let top = top_band(&grid) as i32;
    let terms = (SEPARATION + 1..=top).filter_map(|k| {
        let low = band_sum(f, 0, k - SEPARATION - 1)?;
        Some((low, project(g, Band::At(k as u32))))
    });
    Ok(accumulate(grid, terms))
}

/// Balanced part `Π(f, g) = Σ_{|j-k| ≤ 4} P_j f · P_k g`, including the
/// low-low interaction of the two `P_{≤0}` blocks.
pub fn balanced_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.grid().check_same(g.grid())?;
    let grid = *f.grid();
    let top = top_band(&grid) as i32;
    let terms = (0..=top).filter_map(|k| {
        let near = band_sum(f, k - SEPARATION, (k + SEPARATION).min(top))?;
        Some((near, project(g, Band::At(k as u32))))
    });
    Ok(accumulate(grid, terms))
}

/// `[A, ∂_x^{-1} v] ∂_x w = A(V w_x) - V A(w_x)` with `V` the mean-zero
/// primitive of `v`.
pub fn commutator_a_para(
    v: &SpectralField,
    w: &SpectralField,
    sym: &LpSymbol,
) -> Result<SpectralField> {
    v.grid().check_same(w.grid())?;
    Ok(commutator(v, w, sym))
}

pub(crate) fn commutator(v: &SpectralField, w: &SpectralField, sym: &LpSymbol) -> SpectralField {
    let big_v = v.primitive();
    let wx = w.diff(1);
    let outer = apply_a(&big_v.mul(&wx), sym);
    let inner = big_v.mul(&apply_a(&wx, sym));
    &outer - &inner
}

/// `L_A(v, w) = -⅓ A(vw) - ⅔ [A, ∂_x^{-1} v] w_x + ⅓ Av · w`
pub fn l_a(v: &SpectralField, w: &SpectralField, sym: &LpSymbol) -> Result<SpectralField> {
    v.grid().check_same(w.grid())?;
    Ok(l_a_unchecked(v, w, sym))
}

pub(crate) fn l_a_unchecked(v: &SpectralField, w: &SpectralField, sym: &LpSymbol) -> SpectralField {
    let a_vw = apply_a(&v.mul(w), sym);
    let comm = commutator(v, w, sym);
    let av_w = apply_a(v, sym).mul(w);
    a_vw.scale(-1.0 / 3.0)
        .axpy(-2.0 / 3.0, &comm)
        .axpy(1.0 / 3.0, &av_w)
}
