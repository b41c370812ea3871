//! Randomized audit of the saddle-point inequalities
//! `Δ(h, f⁰) ≥ Δ(h⁰, f⁰) ≥ Δ(h⁰, f)`.

use super::MinimaxSolution;
use crate::cplx::C64;
use crate::error::{Error, Result};
use crate::plan::quadrature_delta;
use crate::spectra::{mean, synthesize, Coeffs, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Modes in the smooth log-perturbation of a density.
const MODES: usize = 4;
/// Characteristic coefficients perturbed per probe.
const TOUCHED: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleReport {
    pub probes: usize,
    pub seed: u64,
    /// `Δ(h⁰, f⁰)`.
    pub delta0: f64,
    /// `(Δ(h⁰, f⁰) − max Δ(h⁰, f)) / Δ(h⁰, f⁰)` over the density probes.
    pub saddle_hi: f64,
    /// `(min Δ(h, f⁰) − Δ(h⁰, f⁰)) / Δ(h⁰, f⁰)` over the characteristic probes.
    pub saddle_lo: f64,
    /// Largest relative violation of either inequality, zero when both hold.
    pub max_violation: f64,
    /// Log-log slope of `Δ(h⁰ + sδ, f⁰) − Δ(h⁰, f⁰)` in `s`, when measurable.
    pub growth_exponent: Option<f64>,
}

fn probe_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Smooth log-perturbation with sup norm `σ ~ U(0.05, 0.8)`.
fn log_perturbation<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    let sigma = rng.random_range(0.05..0.8);
    let coef: Vec<(f64, f64)> = (0..MODES)
        .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let p: Vec<f64> = (0..m)
        .map(|i| {
            let lam = std::f64::consts::PI * (2.0 * i as f64 / m as f64 - 1.0);
            coef.iter()
                .enumerate()
                .map(|(k, (b, c))| {
                    let w = (k + 1) as f64 * lam;
                    b * w.cos() + c * w.sin()
                })
                .sum()
        })
        .collect();
    let top = p.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    p.iter().map(|x| sigma * x / top).collect()
}

/// Admissible indices next to the boundary of the observed set.
fn boundary_indices(sol: &MinimaxSolution) -> Vec<i64> {
    let plan = &sol.h0;
    let (lo, hi) = (plan.h_coeffs.lo, plan.h_coeffs.hi());
    let n = plan.n as i64;
    let mut near: Vec<i64> = (1..=2 * TOUCHED as i64).map(|k| -k).collect();
    if sol.problem.is_interpolation() {
        near = (1..=TOUCHED as i64).map(|k| -k).chain(n..n + TOUCHED as i64).collect();
    }
    near.into_iter().filter(|&j| j >= lo && j <= hi && plan.admissible(j)).collect()
}

fn random_direction<R: Rng>(idx: &[i64], m: usize, rng: &mut R) -> Vec<C64> {
    let mut picked: Vec<i64> = idx.to_vec();
    while picked.len() > TOUCHED {
        let k = rng.random_range(0..picked.len());
        picked.swap_remove(k);
    }
    let lo = *picked.iter().min().unwrap_or(&0);
    let hi = *picked.iter().max().unwrap_or(&0);
    let mut vals = vec![C64::new(0.0, 0.0); (hi - lo + 1) as usize];
    for j in &picked {
        let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        vals[(j - lo) as usize] = z;
    }
    let norm = vals.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    synthesize(&Coeffs::new(lo, vals.iter().map(|z| z / norm).collect()), m)
}

/// Audits the solution with `n_probes` random densities from its class and
/// `n_probes` random admissible characteristics. Probe `k` draws from
/// stream `k` of a generator seeded with `seed`, so reports are
/// reproducible and independent of the thread count.
pub fn verify_saddle(sol: &MinimaxSolution, n_probes: usize, seed: u64) -> Result<SaddleReport> {
    if n_probes == 0 {
        return Err(Error::input("at least one probe is required"));
    }
    let f0 = &sol.lf_density;
    let m = f0.len();
    let grid = Grid::of_samples(f0)?;
    let inverse = sol.problem.is_interpolation() && !sol.problem.is_noisy();
    let fclass = sol.class.sample(&grid, inverse)?;
    let g0 = sol.lf_noise.as_deref();
    let gclass = match (&sol.noise_class, g0) {
        (Some(c), Some(_)) => Some(c.sample(&grid, false)?),
        (None, None) => None,
        _ => return Err(Error::input("noise class and noise density must come together")),
    };
    let a = &sol.h0.a;
    let h0 = sol.h0.h_on_grid(m);
    let delta0 = quadrature_delta(a, &h0, f0, g0);
    if !(delta0 > 0.0) {
        return Err(Error::input("the solution has no positive error to audit"));
    }
    let idx = boundary_indices(sol);
    let power = mean(f0) + g0.map(mean).unwrap_or(0.0);
    let base_amp = (delta0 / power).sqrt();

    let gains: Vec<(f64, Option<f64>)> = (0..n_probes as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = probe_rng(seed, k);
            let pf = log_perturbation(m, &mut rng);
            let f = fclass.perturb(f0, &pf, &mut rng);
            let g = match (&gclass, g0) {
                (Some(gc), Some(g0)) => {
                    let pg = log_perturbation(m, &mut rng);
                    Some(gc.perturb(g0, &pg, &mut rng))
                }
                _ => None,
            };
            let hi = (quadrature_delta(a, &h0, &f, g.as_deref()) - delta0) / delta0;
            let lo = if idx.is_empty() {
                None
            } else {
                let amp = base_amp * 10f64.powf(rng.random_range(-3.0..0.0));
                let dir = random_direction(&idx, m, &mut rng);
                let h: Vec<C64> = h0.iter().zip(&dir).map(|(x, d)| x + d * amp).collect();
                Some((quadrature_delta(a, &h, f0, g0) - delta0) / delta0)
            };
            (hi, lo)
        })
        .collect();
    let max_hi = gains.iter().map(|g| g.0).fold(f64::NEG_INFINITY, f64::max);
    let min_lo = gains.iter().filter_map(|g| g.1).fold(f64::INFINITY, f64::min);
    let saddle_hi = -max_hi;
    let saddle_lo = if min_lo.is_finite() { min_lo } else { 0.0 };

    let growth_exponent = if idx.is_empty() {
        None
    } else {
        let mut rng = probe_rng(seed, n_probes as u64);
        let dir = random_direction(&idx, m, &mut rng);
        let pts: Vec<(f64, f64)> = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
            .iter()
            .map(|&s| {
                let h: Vec<C64> = h0.iter().zip(&dir).map(|(x, d)| x + d * (s * base_amp)).collect();
                (s, quadrature_delta(a, &h, f0, g0) - delta0)
            })
            .collect();
        if pts.iter().all(|p| p.1 > 1e-12 * delta0) {
            let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
            let (mx, my) = (mean(&xs), mean(&ys));
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            Some(sxy / sxx)
        } else {
            None
        }
    };

    Ok(SaddleReport {
        probes: n_probes,
        seed,
        delta0,
        saddle_hi,
        saddle_lo,
        max_violation: (-saddle_hi).max(-saddle_lo).max(0.0),
        growth_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefs::CoefSeq;
    use crate::minimax::{lf_extrap_d0, lf_interp_d0minus, DensityClass, MinimaxConfig};
    use crate::cplx::C64;

    fn cfg() -> MinimaxConfig {
        MinimaxConfig { grid: 1024, trunc: 128, ..Default::default() }
    }

    #[test]
    fn white_noise_prediction_is_a_saddle_point() {
        let a = CoefSeq::finite(vec![C64::new(1.0, 0.0)]);
        let sol = lf_extrap_d0(&a, 1.0, None, &cfg()).unwrap();
        let r = verify_saddle(&sol, 32, 7).unwrap();
        assert!(r.max_violation <= 1e-9, "{r:?}");
        let e = r.growth_exponent.unwrap();
        assert!((e - 2.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn audit_is_reproducible() {
        let a = CoefSeq::from_real(&[1.0, 0.5]);
        let sol = lf_extrap_d0(&a, 2.0, None, &cfg()).unwrap();
        let r1 = verify_saddle(&sol, 16, 3).unwrap();
        let r2 = verify_saddle(&sol, 16, 3).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.max_violation <= 1e-9, "{r1:?}");
    }

    #[test]
    fn inverse_power_example_violates_the_upper_inequality() {
        let a = CoefSeq::from_real(&[4.0, 3f64.sqrt()]);
        let sol = lf_interp_d0minus(&a, 1.0, &cfg()).unwrap();
        assert!(matches!(sol.class, DensityClass::D0minus { .. }));
        let r = verify_saddle(&sol, 64, 11).unwrap();
        assert!(r.saddle_lo >= -1e-9, "{r:?}");
        assert!(r.saddle_hi < 0.0, "{r:?}");
    }
}
