//! Spectral densities on a uniform frequency grid.
//!
//! A density is either rational, `f = |P(e^{−iλ})|² / |Q(e^{−iλ})|²`, or a
//! table of samples at `λ_m = −π + 2πm/M`. Everything downstream works with
//! samples, so the grid is the common currency of the crate.

mod density;
pub use density::eval_density;
mod factor;
mod fourier;
mod grid;

pub use density::SpectralDensity;
pub use factor::{
    apply_floor, check_szego, check_szego_samples, factorize, factorize_samples, one_step_error,
    Factorization, SzegoReport, DEFAULT_FACTOR_TOL, FLOOR_RATIO, MAX_CLAMPED_FRACTION,
};
pub use fourier::{analyze, analyze_real, fourier_coeffs, mean, synthesize, Coeffs, Transform};
pub use grid::{Grid, DEFAULT_GRID, DEFAULT_TRUNC};
