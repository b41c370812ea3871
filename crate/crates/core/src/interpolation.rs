//! Interpolation of `A_Nξ = Σ_{j=0}^{N} a(j) ξ(j)` from observations at
//! `j ∉ {0..N}`.
//!
//! Without noise `c = B_N⁻¹ a` with `B_N` the Toeplitz matrix of `1/f`,
//! `h = A_N − C/f` and `Δ = ⟨c, a⟩`. With noise the system becomes
//! `B_N c = R_N a` over the symbols of `1/(f+g)` and `f/(f+g)`.

use crate::coefs::CoefSeq;
use crate::cplx::C64;
use crate::error::{Error, Result};
use crate::extrapolation::{check_minimality, noisy_characteristic, noisy_solve, noisy_symbols};
use crate::operators::{build_toeplitz, solve_hpd};
use crate::plan::{project, EstimatePlan, Problem};
use crate::spectra::{fourier_coeffs, synthesize, Coeffs, Grid, SpectralDensity, Transform};

/// Largest `|Im Δ| / |Δ|` accepted without a warning.
pub const DELTA_IMAG_TOL: f64 = 1e-10;

fn finite_values(a: &CoefSeq) -> Result<Vec<C64>> {
    a.validate()?;
    match a {
        CoefSeq::Finite { coeffs } => Ok(coeffs.clone()),
        _ => Err(Error::Unsupported("interpolation needs a finite functional".into())),
    }
}

fn imag_warning(delta: C64, warnings: &mut Vec<String>) {
    if delta.im.abs() > DELTA_IMAG_TOL * delta.norm().max(f64::MIN_POSITIVE) {
        warnings.push(format!("error formula left an imaginary part {:.3e}", delta.im));
    }
}

pub fn interpolate(f: &SpectralDensity, a: &CoefSeq, grid: &Grid, l: usize) -> Result<EstimatePlan> {
    interpolate_samples(&f.eval(grid)?, &finite_values(a)?, l)
}

pub fn interpolate_samples(f: &[f64], a: &[C64], l: usize) -> Result<EstimatePlan> {
    let m = f.len();
    Grid::new(m)?;
    let n = a.len();
    if n == 0 || n > m / 2 - 1 {
        return Err(Error::input(format!("{n} coefficients do not fit a grid of {m} points")));
    }
    check_minimality(f)?;
    let r = fourier_coeffs(f, Transform::OfInvF, n)?;
    let b = build_toeplitz(&r, n)?;
    let sol = solve_hpd(&b, a)?;
    let c = sol.x;
    let delta: C64 = c.iter().zip(a).map(|(x, y)| x * y.conj()).sum();
    let big_a = synthesize(&Coeffs::causal(a.to_vec()), m);
    let big_c = synthesize(&Coeffs::causal(c), m);
    let h: Vec<C64> = (0..m).map(|i| big_a[i] - big_c[i] / f[i]).collect();
    let pr = project(Problem::Interpolation, n, l, &h, a);
    let mut warnings = vec![];
    imag_warning(delta, &mut warnings);
    Ok(EstimatePlan {
        problem: Problem::Interpolation,
        n,
        a: a.to_vec(),
        h_coeffs: pr.kept,
        delta: delta.re,
        delta_imag: delta.im,
        support_leakage: pr.leakage,
        discarded_energy: pr.discarded,
        min_eigenvalue: Some(sol.min_eigenvalue),
        order_change: None,
        warnings,
    })
}

pub fn interpolate_noisy(
    f: &SpectralDensity,
    g: &SpectralDensity,
    a: &CoefSeq,
    grid: &Grid,
    l: usize,
) -> Result<EstimatePlan> {
    interpolate_noisy_samples(&f.eval(grid)?, &g.eval(grid)?, &finite_values(a)?, l)
}

pub fn interpolate_noisy_samples(f: &[f64], g: &[f64], a: &[C64], l: usize) -> Result<EstimatePlan> {
    let m = f.len();
    Grid::new(m)?;
    let n = a.len();
    if n == 0 || n > m / 2 - 1 {
        return Err(Error::input(format!("{n} coefficients do not fit a grid of {m} points")));
    }
    let sym = noisy_symbols(f, g, n)?;
    let sol = noisy_solve(&sym, a)?;
    let h = noisy_characteristic(f, g, a, &sol.c);
    let pr = project(Problem::InterpolationNoisy, n, l, &h, a);
    let mut warnings = vec![];
    imag_warning(sol.delta, &mut warnings);
    Ok(EstimatePlan {
        problem: Problem::InterpolationNoisy,
        n,
        a: a.to_vec(),
        h_coeffs: pr.kept,
        delta: sol.delta.re,
        delta_imag: sol.delta.im,
        support_leakage: pr.leakage,
        discarded_energy: pr.discarded,
        min_eigenvalue: Some(sol.min_eigenvalue),
        order_change: None,
        warnings,
    })
}
