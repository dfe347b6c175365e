//! Helpers shared by the unit tests: seeded random fields and O(n²)
//! Fourier-side oracles that never touch the FFT product path.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, SpectralField};

/// Random real field with coefficient envelope `exp(-|ξ| / (8 width))`.
pub fn random_smooth_field(grid: Grid, seed: u64, width: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = (0..grid.n())
        .map(|i| {
            let env = (-grid.wavenumber(i).abs() / (8.0 * width)).exp() * grid.n() as f64;
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env
        })
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

/// Exact convolution of the two spectra, truncated to `|j| ≤ n/3`.
pub fn direct_product(f: &SpectralField, g: &SpectralField) -> SpectralField {
    let grid = *f.grid();
    let n = grid.n();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for p in 0..n {
        for q in 0..n {
            let Some(r) = grid.index_of(grid.mode(p) + grid.mode(q)) else {
                continue;
            };
            if grid.survives_dealias(r) {
                out[r] += f.coeffs()[p] * g.coeffs()[q] / n as f64;
            }
        }
    }
    SpectralField::from_coeffs(grid, out)
}
