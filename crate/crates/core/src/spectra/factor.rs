use super::density::SpectralDensity;
use super::fourier::{analyze_real, synthesize, Coeffs};
use super::grid::Grid;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Samples at or below `FLOOR_RATIO · max f` are raised to that level.
pub const FLOOR_RATIO: f64 = 1e-12;
/// A density with more clamped samples than this fraction is not regular.
pub const MAX_CLAMPED_FRACTION: f64 = 1e-3;
/// Default bound on `max|f − |φ|²| / max f`.
pub const DEFAULT_FACTOR_TOL: f64 = 1e-6;

/// Raise samples to the floor `FLOOR_RATIO · max f`; returns the clamped
/// copy, the number of clamped samples and the floor.
pub fn apply_floor(samples: &[f64]) -> (Vec<f64>, usize, f64) {
    let max = samples.iter().cloned().fold(0.0, f64::max);
    let floor = FLOOR_RATIO * max;
    let mut clamped = 0;
    let out = samples
        .iter()
        .map(|&x| {
            if x > floor {
                x
            } else {
                clamped += 1;
                floor
            }
        })
        .collect();
    (out, clamped, floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SzegoReport {
    pub regular: bool,
    pub geometric_mean: f64,
    pub clamped: usize,
    pub clamped_fraction: f64,
    pub floor: f64,
}

pub fn check_szego(density: &SpectralDensity, grid: &Grid) -> Result<SzegoReport> {
    Ok(check_szego_samples(&density.eval(grid)?))
}

pub fn check_szego_samples(samples: &[f64]) -> SzegoReport {
    let (f, clamped, floor) = apply_floor(samples);
    let frac = clamped as f64 / samples.len() as f64;
    let finite = floor > 0.0 && f.iter().all(|x| x.is_finite());
    let mean_log = if finite {
        f.iter().map(|x| x.ln()).sum::<f64>() / f.len() as f64
    } else {
        f64::NEG_INFINITY
    };
    SzegoReport {
        regular: finite && frac <= MAX_CLAMPED_FRACTION && mean_log.is_finite(),
        geometric_mean: mean_log.exp(),
        clamped,
        clamped_fraction: frac,
        floor,
    }
}

/// Outer factor `φ(λ) = Σ_{k=0}^{L} d(k) e^{−ikλ}` with `|φ|² = f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    #[serde(with = "crate::cplx::vec")]
    pub d: Vec<C64>,
    pub geometric_mean: f64,
    pub residual: f64,
    pub clamped: usize,
}

impl Factorization {
    /// Factorization of a finite moving average given directly by its
    /// coefficients; the residual is zero by construction.
    pub fn from_ma(d: Vec<C64>) -> Self {
        let g = d.first().map(|z| z.norm_sqr()).unwrap_or(0.0);
        Factorization { d, geometric_mean: g, residual: 0.0, clamped: 0 }
    }

    pub fn truncation(&self) -> usize {
        self.d.len().saturating_sub(1)
    }

    /// `φ(λ_m)` on a grid of `m` points.
    pub fn phi_on_grid(&self, m: usize) -> Vec<C64> {
        let c = Coeffs::new(
            -(self.d.len() as i64 - 1),
            self.d.iter().rev().cloned().collect(),
        );
        synthesize(&c, m)
    }

    /// `Σ_{k≥from} |d(k)|²`.
    pub fn tail_energy(&self, from: usize) -> f64 {
        self.d.iter().skip(from).map(|z| z.norm_sqr()).sum()
    }
}

pub fn factorize(density: &SpectralDensity, grid: &Grid, l: usize) -> Result<Factorization> {
    factorize_samples(&density.eval(grid)?, l, DEFAULT_FACTOR_TOL)
}

/// Cepstral factorization of grid samples.
///
/// With `κ_k` the coefficients of `ln f`, the outer factor is
/// `exp(κ_0/2 + Σ_{k≥1} κ_{−k} z^k)` at `z = e^{−iλ}`; its power series is
/// expanded by the recursion `n d_n = Σ_{k=1}^{n} k ψ_k d_{n−k}`.
pub fn factorize_samples(samples: &[f64], l: usize, tol: f64) -> Result<Factorization> {
    let m = samples.len();
    Grid::new(m)?;
    if l >= m / 2 {
        return Err(Error::input(format!("truncation {l} too large for a grid of {m} points")));
    }
    let report = check_szego_samples(samples);
    if !report.regular {
        return Err(Error::NotRegular { clamped: report.clamped, total: m });
    }
    let (f, clamped, _) = apply_floor(samples);
    let logf: Vec<f64> = f.iter().map(|x| x.ln()).collect();
    let kappa = analyze_real(&logf, l);
    let mut psi = vec![ZERO; l + 1];
    psi[0] = C64::new(kappa.get(0).re / 2.0, 0.0);
    for (k, p) in psi.iter_mut().enumerate().skip(1) {
        *p = kappa.get(-(k as i64));
    }
    let mut d = vec![ZERO; l + 1];
    d[0] = C64::new(psi[0].re.exp(), 0.0);
    for n in 1..=l {
        let mut s = ZERO;
        for k in 1..=n {
            s += psi[k] * d[n - k] * k as f64;
        }
        d[n] = s / n as f64;
    }
    let mut fact = Factorization {
        d,
        geometric_mean: report.geometric_mean,
        residual: 0.0,
        clamped,
    };
    let phi = fact.phi_on_grid(m);
    let fmax = f.iter().cloned().fold(0.0, f64::max);
    fact.residual = samples
        .iter()
        .zip(&phi)
        .map(|(x, p)| (x - p.norm_sqr()).abs())
        .fold(0.0, f64::max)
        / fmax;
    if !(fact.residual <= tol) {
        return Err(Error::FactorizationNotConverged { residual: fact.residual });
    }
    Ok(fact)
}

/// `Σ_{u=0}^{j} |d(u)|²`, the error of predicting `j+1` steps ahead.
pub fn one_step_error(fact: &Factorization, j: usize) -> Result<f64> {
    if j > fact.truncation() {
        return Err(Error::TruncationRange { index: j, truncation: fact.truncation() });
    }
    Ok(fact.d[..=j].iter().map(|z| z.norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1024).unwrap()
    }

    #[test]
    fn ma1_factor() {
        let f = SpectralDensity::from_real(&[1.0, 0.5], &[1.0]).unwrap();
        let fac = factorize(&f, &grid(), 64).unwrap();
        assert!((fac.d[0].re - 1.0).abs() < 1e-12);
        assert!((fac.d[1].re - 0.5).abs() < 1e-12);
        assert!(fac.d[2..].iter().all(|z| z.norm() < 1e-12));
        assert!((one_step_error(&fac, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((one_step_error(&fac, 1).unwrap() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn ar1_factor_is_geometric() {
        let fac = factorize(&SpectralDensity::ar1(0.5), &grid(), 64).unwrap();
        for (k, z) in fac.d.iter().enumerate().take(40) {
            assert!((z - C64::new(0.5f64.powi(k as i32), 0.0)).norm() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn constant_density() {
        let fac = factorize(&SpectralDensity::white(3.0), &grid(), 16).unwrap();
        assert!((fac.d[0].re - 3.0f64.sqrt()).abs() < 1e-13);
        assert!(fac.d[1..].iter().all(|z| z.norm() < 1e-13));
        assert!((one_step_error(&fac, 7).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            one_step_error(&fac, 17),
            Err(Error::TruncationRange { .. })
        ));
    }

    #[test]
    fn complex_coefficients_reconstruct() {
        let f = SpectralDensity::rational(
            vec![C64::new(1.0, 0.0), C64::new(0.3, 0.4)],
            vec![C64::new(1.0, 0.0), C64::new(0.0, -0.5)],
        )
        .unwrap();
        let fac = factorize(&f, &grid(), 200).unwrap();
        assert!(fac.residual < 1e-10);
        assert!(fac.d[0].im == 0.0 && fac.d[0].re > 0.0);
        assert!((fac.d[1] - C64::new(0.3, 0.4 + 0.5)).norm() < 1e-10);
    }

    #[test]
    fn szego_checks() {
        let r = check_szego(&SpectralDensity::white(4.0), &grid()).unwrap();
        assert!(r.regular);
        assert!((r.geometric_mean - 4.0).abs() < 1e-12);
        let mut v = vec![1.0; 1024];
        for x in v.iter_mut().take(100) {
            *x = 0.0;
        }
        let r = check_szego_samples(&v);
        assert!(!r.regular);
        assert_eq!(r.clamped, 100);
        assert!(matches!(
            factorize_samples(&v, 16, 1e-6),
            Err(Error::NotRegular { .. })
        ));
    }

    #[test]
    fn isolated_zero_is_still_regular() {
        let f = SpectralDensity::from_real(&[1.0, 1.0], &[1.0]).unwrap();
        let r = check_szego(&f, &grid()).unwrap();
        assert!(r.regular);
        assert_eq!(r.clamped, 1);
    }
}
