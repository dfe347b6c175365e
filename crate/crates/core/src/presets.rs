//! Named initial data.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    Zero,
    /// `sin(2πx/Λ)`
    Sin,
    /// `sin(kx) + ½ cos(2kx)` with `k = 2π/Λ`
    TwoMode,
    /// Gaussian of width `Λ/16` centred at `Λ/2`
    GaussianBump,
    /// Seeded phases, amplitude `2^{-σk}` on every mode of band `k`
    RandomDecay(f64),
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => return Ok(Preset::Zero),
            "sin" => return Ok(Preset::Sin),
            "two_mode" => return Ok(Preset::TwoMode),
            "gaussian_bump" => return Ok(Preset::GaussianBump),
            _ => {}
        }
        let arg = s
            .strip_prefix("random_decay(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("random_decay:"));
        match arg.map(|a| a.trim().parse::<f64>()) {
            Some(Ok(sigma)) if sigma.is_finite() => Ok(Preset::RandomDecay(sigma)),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Zero => write!(f, "zero"),
            Preset::Sin => write!(f, "sin"),
            Preset::TwoMode => write!(f, "two_mode"),
            Preset::GaussianBump => write!(f, "gaussian_bump"),
            Preset::RandomDecay(s) => write!(f, "random_decay({s})"),
        }
    }
}

/// Dyadic band index of a nonzero wavenumber: `k = max(0, ⌈log₂|ξ|⌉)`.
pub fn band_of(xi: f64) -> u32 {
    xi.abs().log2().ceil().max(0.0) as u32
}

impl Preset {
    pub fn build(&self, grid: Grid, seed: u64) -> SpectralField {
        let k = grid.fundamental();
        let l = grid.length();
        let sample =
            |f: &dyn Fn(f64) -> f64| SpectralField::from_fn(grid, f).expect("presets are finite");
        match *self {
            Preset::Zero => SpectralField::zeros(grid),
            Preset::Sin => sample(&|x| (k * x).sin()),
            Preset::TwoMode => sample(&|x| (k * x).sin() + 0.5 * (2.0 * k * x).cos()),
            Preset::GaussianBump => {
                let w = l / 16.0;
                sample(&|x| (-((x - 0.5 * l) / w).powi(2)).exp())
            }
            Preset::RandomDecay(sigma) => random_decay(grid, sigma, seed),
        }
    }
}

fn random_decay(grid: Grid, sigma: f64, seed: u64) -> SpectralField {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for j in 1..=(n / 3) as i64 {
        let xi = j as f64 * grid.fundamental();
        let amp = 2f64.powf(-sigma * band_of(xi) as f64);
        let theta = rng.gen_range(0.0..2.0 * PI);
        let c = Complex64::from_polar(0.5 * n as f64 * amp, theta);
        coeffs[grid.index_of(j).expect("in range")] = c;
        coeffs[grid.index_of(-j).expect("in range")] = c.conj();
    }
    SpectralField::from_coeffs(grid, coeffs)
}

pub fn preset_data(name: &str, grid: Grid, seed: u64) -> Result<SpectralField> {
    Ok(name.parse::<Preset>()?.build(grid, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("zero".parse::<Preset>().unwrap(), Preset::Zero);
        assert_eq!(
            "random_decay(1.6)".parse::<Preset>().unwrap(),
            Preset::RandomDecay(1.6)
        );
        assert_eq!(
            "random_decay:2".parse::<Preset>().unwrap(),
            Preset::RandomDecay(2.0)
        );
        assert!(matches!(
            "bogus".parse::<Preset>(),
            Err(Error::UnknownPreset(_))
        ));
        assert!("random_decay(x)".parse::<Preset>().is_err());
    }

    #[test]
    fn closed_form_presets() {
        let g = Grid::new(64, 10.0).unwrap();
        assert_eq!(preset_data("zero", g, 0).unwrap().linf(), 0.0);
        let s = preset_data("sin", g, 0).unwrap();
        let want = SpectralField::from_fn(g, |x| (2.0 * PI * x / 10.0).sin()).unwrap();
        assert!((&s - &want).linf() < 1e-15);
    }

    #[test]
    fn random_decay_is_deterministic() {
        let g = Grid::standard(256).unwrap();
        let a = preset_data("random_decay(1.6)", g, 7).unwrap();
        let b = preset_data("random_decay(1.6)", g, 7).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = preset_data("random_decay(1.6)", g, 8).unwrap();
        assert_ne!(a.samples(), c.samples());
        assert!(a.mean().abs() < 1e-15);
        assert!((&a.dealias() - &a).linf() < 1e-14);
    }
}
