//! Conserved quantities, `X^s` norms, the normal-form variable and the
//! modified energy `Ẽ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpectralField;
use crate::lp::{self, apply_a, Band, LpSymbol};
use crate::stepper::nonlinearity;

/// Diagnostics of one field at one time. Serialized as one CSV row with
/// columns `t,e1,e2_gauge,beta,e_tilde,hs_high,linf,h1,h1s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e1: f64,
    pub e2_gauge: f64,
    pub beta: f64,
    pub e_tilde: f64,
    pub hs_high: f64,
    pub linf: f64,
    pub h1: f64,
    pub h1s: f64,
}

impl EnergyReport {
    pub fn compute(u: &SpectralField, t: f64, e1_0: f64, sym: &LpSymbol) -> Self {
        let h1 = u.hdot(1.0);
        let (e2_gauge, beta) = e2_gauge(u, t, e1_0);
        Self {
            t,
            e1: h1 * h1,
            e2_gauge,
            beta,
            e_tilde: modified_energy(u, sym),
            hs_high: high_seminorm_sq(u, sym),
            linf: u.linf(),
            h1,
            h1s: u.hdot(1.0 + sym.s()),
        }
    }

    /// The uncorrected `E₂`, recovered as `E₂* + β E₁`.
    pub fn e2_raw(&self) -> f64 {
        self.e2_gauge + self.beta * self.e1
    }
}

/// `E₁ = ∫ u_x²`
pub fn e1(u: &SpectralField) -> f64 {
    u.hdot(1.0).powi(2)
}

/// `∫ u_xx² - u u_x²` without the drift correction.
pub fn e2_raw(u: &SpectralField) -> f64 {
    let ux = u.diff(1);
    u.hdot(2.0).powi(2) - u.inner(&ux.mul(&ux))
}

/// Gauge-corrected `E₂* = ∫ u_xx² - (u + β) u_x²` with the Galilean drift
/// `β(t) = E₁(0) t / (2Λ)`. Returns `(E₂*, β)`.
pub fn e2_gauge(u: &SpectralField, t: f64, e1_0: f64) -> (f64, f64) {
    let beta = galilean_drift(e1_0, t, u.grid().length());
    (e2_raw(u) - beta * e1(u), beta)
}

pub fn galilean_drift(e1_0: f64, t: f64, length: f64) -> f64 {
    e1_0 * t / (2.0 * length)
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.5 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange {
            value: s,
            range: "(1/2, 1]",
        })
    }
}

/// `‖u‖_{X^s} = max(‖u‖_∞, ‖u‖_{Ḣ¹}, ‖u‖_{Ḣ^{1+s}})`
pub fn xs_norm(u: &SpectralField, s: f64) -> Result<f64> {
    check_s(s)?;
    Ok(u.linf().max(u.hdot(1.0)).max(u.hdot(1.0 + s)))
}

/// `‖u‖_{X⁰} = max(‖u‖_∞, ‖u‖_{Ḣ¹})`
pub fn x0_norm(u: &SpectralField) -> f64 {
    u.linf().max(u.hdot(1.0))
}

/// `ũ = u - ⅙ ∂_x^{-2}(u²) + ⅙ (∂_x^{-1} u)²`
pub fn normal_form_variable(u: &SpectralField) -> SpectralField {
    let u2 = u.mul(u);
    let first = u2.primitive().primitive();
    let prim = u.primitive();
    let second = prim.mul(&prim);
    u.axpy(-1.0 / 6.0, &first).axpy(1.0 / 6.0, &second)
}

/// `‖u_{>0}‖²_{Ḣ^{1+s}}`, which coincides with `∫ (A u_x)²`.
pub fn high_seminorm_sq(u: &SpectralField, sym: &LpSymbol) -> f64 {
    lp::project(u, Band::Gt(0)).hdot(1.0 + sym.s()).powi(2)
}

/// Quadratic and cubic pieces of `Ẽ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModifiedEnergyParts {
    /// `∫ (A u_x)²`
    pub quadratic: f64,
    /// `-⅓ ∫ Au (A(u²) + 2 [A, ∂_x^{-1} u] u_x - Au·u)`, equal to `∫ Au · L_A(u, u)`
    pub cubic: f64,
}

impl ModifiedEnergyParts {
    pub fn total(&self) -> f64 {
        self.quadratic + self.cubic
    }
}

pub fn modified_energy_parts(u: &SpectralField, sym: &LpSymbol) -> ModifiedEnergyParts {
    let au = apply_a(u, sym);
    let aux = au.diff(1);
    let bracket = apply_a(&u.mul(u), sym)
        .axpy(2.0, &lp::commutator(u, u, sym))
        .axpy(-1.0, &au.mul(u));
    ModifiedEnergyParts {
        quadratic: aux.inner(&aux),
        cubic: -au.inner(&bracket) / 3.0,
    }
}

/// `Ẽ = ∫ (Au_x)² - ⅓ Au · (A(u²) + 2[A, ∂_x^{-1}u] u_x - Au·u) dx`
pub fn modified_energy(u: &SpectralField, sym: &LpSymbol) -> f64 {
    modified_energy_parts(u, sym).total()
}

/// `|‖u_{>0}‖²_{Ḣ^{1+s}} - Ẽ| / (E₁ ‖u‖_∞)`; zero when numerator and
/// denominator both vanish.
pub fn equivalence_defect(u: &SpectralField, sym: &LpSymbol) -> Result<f64> {
    let numerator = (high_seminorm_sq(u, sym) - modified_energy(u, sym)).abs();
    let denominator = e1(u) * u.linf();
    let scale = high_seminorm_sq(u, sym).max(f64::MIN_POSITIVE);
    if denominator == 0.0 {
        if numerator <= 1e-14 * scale {
            return Ok(0.0);
        }
        return Err(Error::DegenerateDefect(numerator));
    }
    Ok(numerator / denominator)
}

/// Splits the right side of `u_t + u_xxx = Q` into
/// `Q₁ = ∂_x^{-2}(u_x u_xx)` and `Q₂ = -u u_x`.
pub fn q_split(u: &SpectralField) -> (SpectralField, SpectralField) {
    let ux = u.diff(1);
    let uxx = ux.diff(1);
    let q1 = ux.mul(&uxx).primitive().primitive();
    let q2 = -&u.mul(&ux);
    (q1, q2)
}

/// Quartic expression for `dẼ/dt`:
/// `∫ AQ · L_A(u, u) + Au · L_A(Q, u) + Au · L_A(u, Q)`.
pub fn modified_energy_rate(u: &SpectralField, sym: &LpSymbol) -> f64 {
    let q = nonlinearity(u);
    let au = apply_a(u, sym);
    let aq = apply_a(&q, sym);
    aq.inner(&lp::l_a_unchecked(u, u, sym))
        + au.inner(&lp::l_a_unchecked(&q, u, sym))
        + au.inner(&lp::l_a_unchecked(u, &q, sym))
}

/// `dẼ/dt / (‖Au‖² (‖u_x‖² + ‖u_x‖_∞ ‖u‖_∞))`, the implied constant of
/// the growth estimate at one time. Zero when the weight vanishes.
pub fn growth_ratio(u: &SpectralField, sym: &LpSymbol) -> f64 {
    let au = apply_a(u, sym);
    let ux = u.diff(1);
    let weight = au.inner(&au) * (ux.inner(&ux) + ux.linf() * u.linf());
    if weight == 0.0 {
        0.0
    } else {
        modified_energy_rate(u, sym) / weight
    }
}
