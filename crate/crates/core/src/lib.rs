//! Mean-square optimal and minimax-robust linear estimation of functionals
//! of stationary sequences.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectra`]: densities on a uniform grid, Fourier coefficients, the
//!   Szegő regularity test and cepstral factorization `f = |φ|²`.
//! - [`operators`]: game, Hankel and Toeplitz matrices with the Hermitian
//!   eigen and positive-definite solvers used everywhere else.
//! - [`game`]: the power-constrained estimation game and its value.
//! - [`extrapolation`] and [`interpolation`]: classical estimates under a
//!   known density, with or without additive noise.
//! - [`minimax`]: least favourable densities for the uncertainty classes and
//!   a seeded saddle-point audit.
//! - [`simulate`]: Gaussian moving-average generation and Monte Carlo checks
//!   of the theoretical errors.
//!
//! All integrals `(1/2π)∫ · dλ` are evaluated by the periodic trapezoid rule on
//! `λ_m = −π + 2πm/M`, and Fourier coefficients follow
//! `r_k = (1/2π)∫ t(λ) e^{−ikλ} dλ`.

pub mod coefs;
pub mod cplx;
pub mod error;
pub mod extrapolation;
pub mod game;
pub mod interpolation;
pub mod minimax;
pub mod operators;
pub mod plan;
pub mod simulate;
pub mod spectra;

pub use coefs::CoefSeq;
pub use cplx::C64;
pub use error::{Error, ErrorKind, Result};
pub use plan::{EstimatePlan, Problem};
pub use spectra::{Coeffs, Factorization, Grid, SpectralDensity};
