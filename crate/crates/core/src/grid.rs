//! Periodic grid, spectral transforms and Fourier multipliers.
//!
//! Coefficients use the unnormalized forward DFT convention: a sampled
//! `sin(2πx/Λ)` has coefficients of magnitude `n/2` at `j = ±1`. The mode
//! index of storage slot `i` is `i` for `i <= n/2` and `i - n` above, so the
//! lattice is `{-n/2+1, …, n/2}` with the Nyquist mode at `+n/2`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_transform(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    buf
}

fn inverse_transform(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Uniform periodic grid on `[0, Λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count {n} must be a power of two no smaller than 16"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain length {length} must be positive and finite"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid on the standard torus `[0, 2π)`.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Smallest nonzero wavenumber `2π/Λ`.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Integer mode index stored in slot `i`.
    pub fn mode(&self, i: usize) -> i64 {
        if i <= self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    pub fn index_of(&self, j: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if j > half || j <= -half {
            return None;
        }
        Some(if j >= 0 {
            j as usize
        } else {
            (j + self.n as i64) as usize
        })
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.fundamental()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    /// `|ξ|` of the Nyquist mode, the largest representable frequency.
    pub fn max_wavenumber(&self) -> f64 {
        (self.n / 2) as f64 * self.fundamental()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Whether slot `i` survives the 2/3 rule (`|j| <= n/3`).
    pub fn survives_dealias(&self, i: usize) -> bool {
        3 * self.mode(i).unsigned_abs() as usize <= self.n
    }

    pub fn points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|i| i as f64 * h).collect()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} Λ={}", self.n, self.length)
    }
}

/// Which norm [`SpectralField::norm`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    Linf,
    L2,
    /// Homogeneous Sobolev seminorm of order σ ∈ [0, 3], zero mode excluded.
    Hdot(f64),
}

/// A real periodic field held both as samples and as Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    samples: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n],
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.n];
        coeffs[0] = Complex64::new(value * grid.n as f64, 0.0);
        Self {
            grid,
            samples: vec![value; grid.n],
            coeffs,
        }
    }

    /// Samples `sampler` at the grid points.
    pub fn from_fn(grid: Grid, sampler: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_samples(grid, grid.points().into_iter().map(sampler).collect())
    }

    pub fn from_samples(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::MalformedData(format!(
                "expected {} samples, got {}",
                grid.n,
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let coeffs = forward_transform(&samples);
        Ok(Self {
            grid,
            samples,
            coeffs,
        })
    }

    /// Builds a field from coefficients, projecting onto the Hermitian
    /// (real-valued) subspace first.
    pub fn from_coeffs(grid: Grid, mut coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.n, "coefficient count must match grid");
        let n = grid.n;
        coeffs[0].im = 0.0;
        coeffs[n / 2].im = 0.0;
        for i in 1..n / 2 {
            let a = coeffs[i];
            let b = coeffs[n - i].conj();
            let avg = (a + b) * 0.5;
            coeffs[i] = avg;
            coeffs[n - i] = avg.conj();
        }
        let samples = inverse_transform(&coeffs);
        Self {
            grid,
            samples,
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    /// Applies a Fourier multiplier `m(ξ)`. The result is projected onto
    /// real fields, so `m` should satisfy `m(-ξ) = conj(m(ξ))`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * m(self.grid.wavenumber(i)))
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    /// Applies an even real multiplier `m(ξ)`.
    pub fn apply_real_multiplier(&self, m: impl Fn(f64) -> f64) -> Self {
        self.apply_multiplier(|xi| Complex64::new(m(xi), 0.0))
    }

    pub fn derivative(&self, order: u32) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidConfig(
                "derivative order must be at least 1".into(),
            ));
        }
        Ok(self.diff(order))
    }

    pub(crate) fn diff(&self, order: u32) -> Self {
        let nyq = self.grid.nyquist_index();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if order % 2 == 1 && i == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, self.grid.wavenumber(i)).powu(order)
                }
            })
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    /// Returns the mean-zero periodic primitive of `f - mean(f)` together
    /// with `mean(f)`.
    pub fn antiderivative_meanzero(&self) -> (Self, f64) {
        (self.primitive(), self.mean())
    }

    /// Mean-zero periodic primitive of `f - mean(f)`.
    pub fn primitive(&self) -> Self {
        let nyq = self.grid.nyquist_index();
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if i == 0 || i == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    c / Complex64::new(0.0, self.grid.wavenumber(i))
                }
            })
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / self.grid.n as f64
    }

    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.length
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        match kind {
            NormKind::Linf => Ok(self.linf()),
            NormKind::L2 => Ok(self.l2()),
            NormKind::Hdot(sigma) => {
                if !(0.0..=3.0).contains(&sigma) {
                    return Err(Error::ExponentOutOfRange {
                        value: sigma,
                        range: "[0, 3]",
                    });
                }
                Ok(self.hdot(sigma))
            }
        }
    }

    pub fn linf(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (sum * self.parseval_factor()).sqrt()
    }

    /// `Ḣ^σ` seminorm without range validation.
    pub fn hdot(&self, sigma: f64) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| self.grid.wavenumber(i).abs().powf(2.0 * sigma) * c.norm_sqr())
            .sum();
        (sum * self.parseval_factor()).sqrt()
    }

    /// `L²` norm computed from samples by the trapezoidal rule.
    pub fn l2_from_samples(&self) -> f64 {
        (self.samples.iter().map(|v| v * v).sum::<f64>() * self.grid.spacing()).sqrt()
    }

    fn parseval_factor(&self) -> f64 {
        let n = self.grid.n as f64;
        self.grid.length / (n * n)
    }

    /// `∫ f g dx` over the torus.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "inner product across grids");
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        sum * self.parseval_factor()
    }

    /// Zeroes every mode with `|j| > n/3`.
    pub fn dealias(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if self.grid.survives_dealias(i) {
                    c
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::from_coeffs(self.grid, coeffs)
    }

    /// Dealiased pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self.mul(other))
    }

    pub(crate) fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "product across grids");
        let samples: Vec<f64> = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .collect();
        let mut coeffs = forward_transform(&samples);
        for (i, c) in coeffs.iter_mut().enumerate() {
            if !self.grid.survives_dealias(i) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        Self::from_coeffs(self.grid, coeffs)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|v| v * a).collect(),
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        assert_eq!(self.grid, other.grid, "axpy across grids");
        Self {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| x + a * y)
                .collect(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| x + y * a)
                .collect(),
        }
    }

    /// Evaluates the trigonometric interpolant at an arbitrary point. Exact
    /// for band-limited fields; cost is proportional to the number of
    /// nonzero coefficients.
    pub fn evaluate_at(&self, x: f64) -> f64 {
        let n = self.grid.n;
        let mut acc = self.coeffs[0].re;
        for i in 1..n / 2 {
            let c = self.coeffs[i];
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let phase = self.grid.wavenumber(i) * x;
            acc += 2.0 * (c.re * phase.cos() - c.im * phase.sin());
        }
        let cn = self.coeffs[n / 2].re;
        if cn != 0.0 {
            acc += cn * (self.grid.max_wavenumber() * x).cos();
        }
        acc / n as f64
    }

    /// Largest `|c(ξ) - conj(c(-ξ))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n;
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (1..n)
            .map(|i| (self.coeffs[i] - self.coeffs[n - i].conj()).norm())
            .fold(self.coeffs[0].im.abs(), f64::max);
        worst / scale
    }

    /// Largest sample discrepancy between `samples` and the inverse
    /// transform of `coeffs`, relative to the largest sample.
    pub fn consistency_defect(&self) -> f64 {
        let recon = inverse_transform(&self.coeffs);
        let scale = self.linf();
        let worst = recon
            .iter()
            .zip(&self.samples)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }

    /// Relative discrepancy `|f - g|_∞ / max(|g|_∞, tiny)`.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let diff = (self - other).linf();
        diff / other.linf().max(f64::MIN_POSITIVE)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<&SpectralField> for f64 {
    type Output = SpectralField;
    fn mul(self, rhs: &SpectralField) -> SpectralField {
        rhs.scale(self)
    }
}
