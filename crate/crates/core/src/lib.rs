//! Numerical laboratory for the dispersive Hunter-Saxton equation
//!
//! ```text
//! u_t + u u_x + u_xxx = ½ ∂_x^{-1}(u_x²)
//! ```
//!
//! on a periodic domain. The crate provides a Fourier pseudospectral
//! discretization, an ETDRK4 time stepper, the Littlewood-Paley toolkit
//! used by the normal-form modified energy, and experiment drivers for the
//! Picard iteration, linearized evolution, difference estimates,
//! characteristic flow and frequency-envelope convergence.
//!
//! Every antiderivative is the mean-zero periodic primitive; see
//! [`energy::e2_gauge`] for how the dropped constant is tracked.

pub mod energy;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod lp;
pub mod presets;
pub mod schemes;
pub mod stepper;
pub mod store;

#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
pub use grid::{Grid, NormKind, SpectralField};
pub use lp::{Band, LpSymbol};
