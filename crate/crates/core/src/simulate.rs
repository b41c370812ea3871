//! Gaussian stationary sequences from a one-sided moving average and Monte
//! Carlo checks of the theoretical estimation errors.
//!
//! A factorization `f = |φ|²` with `φ(λ) = Σ d(k) e^{−ikλ}` gives
//! `ξ(j) = Σ_k d(k) ε(j−k)` for white Gaussian `ε`. Innovations are real
//! when the coefficients are real and circular complex otherwise.

use crate::coefs::CoefSeq;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use crate::plan::EstimatePlan;
use crate::spectra::{factorize, Factorization, SpectralDensity, DEFAULT_TRUNC};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Moving-average terms whose tail energy falls below this fraction of the
/// total are dropped.
const MA_TAIL: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Series length, including the burn-in.
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub burn_in: usize,
    /// Largest `|j|` of the characteristic coefficients applied.
    pub estimator_truncation: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n: 4096, reps: 10_000, seed: 0, burn_in: 1024, estimator_truncation: DEFAULT_TRUNC }
    }
}

impl SimConfig {
    fn validate(&self, ma_len: usize) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::input("at least one replication is required"));
        }
        if self.burn_in < 2 * (ma_len - 1) {
            return Err(Error::input(format!(
                "burn-in {} is shorter than twice the moving-average length {}",
                self.burn_in,
                ma_len - 1
            )));
        }
        if self.n <= self.burn_in {
            return Err(Error::input(format!("series length {} must exceed the burn-in {}", self.n, self.burn_in)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub empirical_delta: f64,
    /// Standard error of the mean; zero for a single replication.
    pub stderr: f64,
    pub theoretical_delta: f64,
    /// `(empirical − theoretical) / stderr`; zero for a single replication.
    pub z_score: f64,
    pub reps: usize,
    pub seed: u64,
    /// Energy of the characteristic coefficients beyond the truncation.
    pub estimator_tail: f64,
    /// Moving-average terms used for the signal (and noise).
    pub ma_terms: Vec<usize>,
}

/// Estimates at several target origins.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub values: Vec<C64>,
    /// `Σ_{|j|>truncation} |ĥ(j)|²`.
    pub tail_energy: f64,
}

/// Seed of replication `r`: the SplitMix64 finalizer applied to `seed ⊕ r`.
pub fn replication_seed(seed: u64, r: u64) -> u64 {
    let mut z = (seed ^ r).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Leading coefficients of `d` carrying all but a negligible share of its energy.
fn effective_ma(d: &[C64]) -> &[C64] {
    let total: f64 = d.iter().map(|z| z.norm_sqr()).sum();
    let mut tail = 0.0;
    let mut len = d.len();
    while len > 1 {
        let t = tail + d[len - 1].norm_sqr();
        if t > MA_TAIL * total {
            break;
        }
        tail = t;
        len -= 1;
    }
    &d[..len]
}

fn innovations<R: Rng>(len: usize, complex: bool, rng: &mut R) -> Vec<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            if complex {
                let (x, y): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                C64::new(h * x, h * y)
            } else {
                C64::new(rng.sample(StandardNormal), 0.0)
            }
        })
        .collect()
}

/// `len` values of the moving average after discarding `burn_in`.
fn moving_average<R: Rng>(d: &[C64], len: usize, burn_in: usize, rng: &mut R) -> Vec<C64> {
    let complex = d.iter().any(|z| z.im != 0.0);
    let q = d.len() - 1;
    let eps = innovations(burn_in + len, complex, rng);
    (burn_in..burn_in + len)
        .map(|j| {
            let mut s = ZERO;
            for (k, dk) in d.iter().enumerate().take(q.min(j) + 1) {
                s += dk * eps[j - k];
            }
            s
        })
        .collect()
}

/// A stationary series with spectral density `|φ|²`, drawn from stream 0 of
/// a generator seeded with `cfg.seed`. Returns `cfg.n − cfg.burn_in` values.
pub fn gen_sequence(fact: &Factorization, cfg: &SimConfig) -> Result<Vec<C64>> {
    let d = effective_ma(&fact.d);
    cfg.validate(d.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(moving_average(d, cfg.n - cfg.burn_in, cfg.burn_in, &mut rng))
}

/// Applies `Σ_{|j|≤truncation} ĥ(j) observed(t + j)` at each target origin `t`.
pub fn apply_estimator(observed: &[C64], plan: &EstimatePlan, targets: &[usize], truncation: usize) -> Result<Estimates> {
    let scale = plan.h_coeffs.max_abs().max(f64::MIN_POSITIVE);
    let mut taps = vec![];
    let mut tail_energy = 0.0;
    for (j, h) in plan.h_coeffs.iter() {
        if h == ZERO {
            continue;
        }
        if !plan.admissible(j) && h.norm() > 1e-8 * scale {
            return Err(Error::Contract(format!("characteristic uses the unobserved index {j}")));
        }
        if j.unsigned_abs() as usize > truncation {
            tail_energy += h.norm_sqr();
        } else if plan.admissible(j) {
            taps.push((j, h));
        }
    }
    let mut values = Vec::with_capacity(targets.len());
    for &t in targets {
        let mut s = ZERO;
        for &(j, h) in &taps {
            let i = t as i64 + j;
            if i < 0 || i >= observed.len() as i64 {
                return Err(Error::Contract(format!("index {j} from origin {t} lies outside the series")));
            }
            s += h * observed[i as usize];
        }
        values.push(s);
    }
    Ok(Estimates { values, tail_energy })
}

fn density_factor(f: &SpectralDensity) -> Result<Factorization> {
    let grid = f.native_grid().unwrap_or_default();
    let l = DEFAULT_TRUNC.min(grid.max_lag());
    factorize(f, &grid, l)
}

/// Monte Carlo mean of `|Aξ − Â|²` with `Â` computed from `ξ (+ η)` by the
/// plan's characteristic. Only the part of the series the estimator reads is
/// generated; replications run in parallel and are summed in order.
pub fn mc_mse(
    f: &SpectralDensity,
    g: Option<&SpectralDensity>,
    a: &CoefSeq,
    plan: &EstimatePlan,
    cfg: &SimConfig,
) -> Result<MCReport> {
    if plan.problem.is_noisy() != g.is_some() {
        return Err(Error::Contract("noise density must be given exactly for noisy plans".into()));
    }
    let target = a.with_truncation(plan.n).values();
    if target.len() != plan.n || target.iter().zip(&plan.a).any(|(x, y)| (x - y).norm() > 1e-12 * (1.0 + y.norm())) {
        return Err(Error::Contract("coefficients differ from those the plan was built for".into()));
    }
    let ff = density_factor(f)?;
    let df = effective_ma(&ff.d).to_vec();
    let gf = g.map(density_factor).transpose()?;
    let dg = gf.as_ref().map(|x| effective_ma(&x.d).to_vec());
    cfg.validate(df.len().max(dg.as_ref().map_or(1, |d| d.len())))?;

    let trunc = cfg.estimator_truncation;
    let n = plan.n;
    let lo = plan.h_coeffs.lo.max(-(trunc as i64)).min(0);
    let hi = plan.h_coeffs.hi().min(trunc as i64).max(n as i64 - 1);
    let origin = (-lo) as usize;
    let span = (hi - lo + 1) as usize;
    if cfg.burn_in + span > cfg.n {
        return Err(Error::input(format!(
            "series length {} is shorter than the burn-in plus the estimator span {}",
            cfg.n,
            cfg.burn_in + span
        )));
    }
    let tail = apply_estimator(&vec![ZERO; span], plan, &[origin], trunc)?.tail_energy;

    let errs: Vec<f64> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(cfg.seed, r));
            rng.set_stream(0);
            let xi = moving_average(&df, span, cfg.burn_in, &mut rng);
            let mut obs = xi.clone();
            if let Some(dg) = &dg {
                rng.set_stream(1);
                rng.set_word_pos(0);
                let eta = moving_average(dg, span, cfg.burn_in, &mut rng);
                for (o, e) in obs.iter_mut().zip(&eta) {
                    *o += e;
                }
            }
            let est = apply_estimator(&obs, plan, &[origin], trunc)?.values[0];
            let truth: C64 = target.iter().enumerate().map(|(j, aj)| aj * xi[origin + j]).sum();
            Ok((truth - est).norm_sqr())
        })
        .collect::<Result<_>>()?;

    let reps = errs.len() as f64;
    let mut mean = 0.0;
    for e in &errs {
        mean += e;
    }
    mean /= reps;
    let (stderr, z_score) = if errs.len() > 1 {
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (reps - 1.0);
        let se = (var / reps).sqrt();
        (se, if se > 0.0 { (mean - plan.delta) / se } else { 0.0 })
    } else {
        (0.0, 0.0)
    };
    let mut ma_terms = vec![df.len()];
    ma_terms.extend(dg.map(|d| d.len()));
    Ok(MCReport {
        empirical_delta: mean,
        stderr,
        theoretical_delta: plan.delta,
        z_score,
        reps: cfg.reps,
        seed: cfg.seed,
        estimator_tail: tail,
        ma_terms,
    })
}
