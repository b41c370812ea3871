//! Uncertainty classes sampled on a grid: candidate densities, scale
//! calibration, membership and feasible random perturbations.

use crate::error::{Error, Result};
use crate::spectra::{mean, Grid, SpectralDensity};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Uncertainty class of a spectral density. Averages are `(1/2π)∫ · dλ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class")]
pub enum DensityClass {
    /// `mean f = power`.
    D0 { power: f64 },
    /// `mean f cos(mλ) = moments[m]`; for interpolation the moments are
    /// those of `1/f`.
    DM { moments: Vec<f64> },
    /// `lower ≤ f ≤ upper`, `mean f = power`.
    Dvu {
        lower: SpectralDensity,
        upper: SpectralDensity,
        power: f64,
    },
    /// `f = (1−eps)·center + eps·w` for some density `w`, `mean f = power`.
    Deps {
        eps: f64,
        center: SpectralDensity,
        power: f64,
    },
    /// `mean |f − center| ≤ eps`.
    D1eps { eps: f64, center: SpectralDensity },
    /// `mean (f − center)² ≤ eps`.
    D2eps { eps: f64, center: SpectralDensity },
    /// `mean 1/f = power`.
    D0minus { power: f64 },
    /// `lower ≤ f ≤ upper`, `mean 1/f = power`.
    DvuMinus {
        lower: SpectralDensity,
        upper: SpectralDensity,
        power: f64,
    },
    /// The single density `density`.
    Fixed { density: SpectralDensity },
}

impl DensityClass {
    pub fn name(&self) -> &'static str {
        match self {
            DensityClass::D0 { .. } => "D0",
            DensityClass::DM { .. } => "DM",
            DensityClass::Dvu { .. } => "Dvu",
            DensityClass::Deps { .. } => "Deps",
            DensityClass::D1eps { .. } => "D1eps",
            DensityClass::D2eps { .. } => "D2eps",
            DensityClass::D0minus { .. } => "D0minus",
            DensityClass::DvuMinus { .. } => "DvuMinus",
            DensityClass::Fixed { .. } => "Fixed",
        }
    }

    /// Evaluates the profiles on `grid`; `inverse_moments` selects moments
    /// of `1/f` for the moment class.
    pub(crate) fn sample(&self, grid: &Grid, inverse_moments: bool) -> Result<Sampled> {
        let pos = |x: f64, what: &str| -> Result<f64> {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(Error::input(format!("{what} must be positive, got {x}")))
            }
        };
        let nonneg = |x: f64, what: &str| -> Result<f64> {
            if x >= 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(Error::input(format!("{what} must be nonnegative, got {x}")))
            }
        };
        Ok(match self {
            DensityClass::D0 { power } => Sampled::Power(pos(*power, "power")?),
            DensityClass::DM { moments } => {
                if moments.is_empty() || !(moments[0] > 0.0) {
                    return Err(Error::input("moment class needs a positive zeroth moment"));
                }
                if moments.len() > grid.max_lag() {
                    return Err(Error::input("too many moments for the grid"));
                }
                check_positive_sequence(moments)?;
                Sampled::Moments { moments: moments.clone(), inverse: inverse_moments }
            }
            DensityClass::Dvu { lower, upper, power } => {
                let (v, u) = (lower.eval(grid)?, upper.eval(grid)?);
                let p = pos(*power, "power")?;
                band_check(&v, &u, p, false)?;
                Sampled::Band { lower: v, upper: u, power: p, inverse: false }
            }
            DensityClass::DvuMinus { lower, upper, power } => {
                let (v, u) = (lower.eval(grid)?, upper.eval(grid)?);
                let p = pos(*power, "power")?;
                band_check(&v, &u, p, true)?;
                Sampled::Band { lower: v, upper: u, power: p, inverse: true }
            }
            DensityClass::Deps { eps, center, power } => {
                if !(*eps > 0.0 && *eps <= 1.0) {
                    return Err(Error::input(format!("contamination must lie in (0, 1], got {eps}")));
                }
                let floor: Vec<f64> = center.eval(grid)?.iter().map(|w| (1.0 - eps) * w).collect();
                let p = pos(*power, "power")?;
                if mean(&floor) > p * (1.0 + 1e-12) {
                    return Err(Error::input("the contaminated center already exceeds the power"));
                }
                Sampled::Above { floor, power: p }
            }
            DensityClass::D1eps { eps, center } => Sampled::Ball {
                center: center.eval(grid)?,
                eps: nonneg(*eps, "radius")?,
                squared: false,
            },
            DensityClass::D2eps { eps, center } => Sampled::Ball {
                center: center.eval(grid)?,
                eps: nonneg(*eps, "radius")?,
                squared: true,
            },
            DensityClass::D0minus { power } => Sampled::InversePower(pos(*power, "power")?),
            DensityClass::Fixed { density } => Sampled::Fixed(density.eval(grid)?),
        })
    }
}

fn band_check(v: &[f64], u: &[f64], p: f64, inverse: bool) -> Result<()> {
    if v.iter().zip(u).any(|(a, b)| a > b) {
        return Err(Error::input("lower bound exceeds upper bound"));
    }
    let (lo, hi) = if inverse {
        (mean(&u.iter().map(|x| 1.0 / x).collect::<Vec<_>>()), mean(&v.iter().map(|x| 1.0 / x).collect::<Vec<_>>()))
    } else {
        (mean(v), mean(u))
    };
    if !(lo <= p * (1.0 + 1e-12) && p <= hi * (1.0 + 1e-12)) {
        return Err(Error::input(format!("power {p} lies outside the band range [{lo}, {hi}]")));
    }
    Ok(())
}

/// Strict positive definiteness of the Toeplitz matrix of `r_0..r_M`.
pub(crate) fn check_positive_sequence(r: &[f64]) -> Result<()> {
    let n = r.len();
    let t = nalgebra::DMatrix::from_fn(n, n, |j, k| r[j.abs_diff(k)]);
    let lo = nalgebra::SymmetricEigen::new(t).eigenvalues.min();
    if lo > 1e-12 * r[0] {
        Ok(())
    } else {
        Err(Error::input("moment sequence is not strictly positive definite"))
    }
}

/// A class evaluated on the working grid.
#[derive(Debug, Clone)]
pub(crate) enum Sampled {
    Power(f64),
    Band { lower: Vec<f64>, upper: Vec<f64>, power: f64, inverse: bool },
    /// `f ≥ floor`, `mean f = power`.
    Above { floor: Vec<f64>, power: f64 },
    Ball { center: Vec<f64>, eps: f64, squared: bool },
    Moments { moments: Vec<f64>, inverse: bool },
    InversePower(f64),
    Fixed(Vec<f64>),
}

/// Pointwise data for the candidate family: the gradient of the error in
/// the density is `q/(x+offset)^power`.
#[derive(Debug, Clone)]
pub(crate) struct Score {
    pub q: Vec<f64>,
    pub offset: Vec<f64>,
    pub power: i32,
}

impl Score {
    fn free(&self, i: usize, t: f64) -> f64 {
        let s = if self.power == 1 { self.q[i] } else { self.q[i].sqrt() };
        t * s - self.offset[i]
    }
}

/// Root `x ≥ c` of `(x − c)(x + o)^p = k`, for `c, o ≥ 0`.
pub(crate) fn ball_root(c: f64, o: f64, k: f64, p: i32) -> f64 {
    if !(k > 0.0) {
        return c;
    }
    if p == 1 {
        return 0.5 * ((c - o) + ((c + o) * (c + o) + 4.0 * k).sqrt());
    }
    // Newton from an upper bound; the function is convex on x ≥ c.
    let mut x = c + k.cbrt();
    for _ in 0..100 {
        let g = (x - c) * (x + o).powi(2) - k;
        let dg = (x + o).powi(2) + 2.0 * (x - c) * (x + o);
        let step = g / dg;
        x -= step;
        if !(step.abs() > 1e-15 * x.abs()) {
            break;
        }
    }
    x.max(c)
}

impl Sampled {
    /// Whether the class has a one-parameter candidate family.
    pub fn has_family(&self) -> bool {
        matches!(self, Sampled::Power(_) | Sampled::Band { .. } | Sampled::Above { .. } | Sampled::Ball { .. })
    }

    /// Member of the candidate family at scale `t ≥ 0`.
    pub fn candidate(&self, s: &Score, t: f64) -> Vec<f64> {
        let m = s.q.len();
        match self {
            Sampled::Power(_) => (0..m).map(|i| s.free(i, t).max(0.0)).collect(),
            Sampled::Band { lower, upper, inverse: false, .. } => {
                (0..m).map(|i| s.free(i, t).min(upper[i]).max(lower[i])).collect()
            }
            Sampled::Band { lower, upper, inverse: true, .. } => (0..m)
                .map(|i| {
                    let x = if s.q[i] > 0.0 { t / s.q[i] } else { f64::INFINITY };
                    x.min(upper[i]).max(lower[i])
                })
                .collect(),
            Sampled::Above { floor, .. } => (0..m).map(|i| s.free(i, t).max(floor[i])).collect(),
            Sampled::Ball { center, squared: false, .. } => (0..m).map(|i| s.free(i, t).max(center[i])).collect(),
            Sampled::Ball { center, squared: true, .. } => (0..m)
                .map(|i| ball_root(center[i], s.offset[i], t * s.q[i], s.power))
                .collect(),
            _ => unreachable!("class without a candidate family"),
        }
    }

    /// Constraint functional, nondecreasing along the family, and its target.
    fn measure(&self, x: &[f64]) -> (f64, f64) {
        match self {
            Sampled::Power(p) => (mean(x), *p),
            Sampled::Band { power, inverse: false, .. } => (mean(x), *power),
            Sampled::Band { power, inverse: true, .. } => (-inverse_mean(x), -power),
            Sampled::Above { power, .. } => (mean(x), *power),
            Sampled::Ball { center, eps, squared } => (distance_abs(x, center, *squared), *eps),
            _ => unreachable!("class without a candidate family"),
        }
    }

    /// Calibrates the family scale by bisection so that the class constraint
    /// holds; `guess` seeds the bracket.
    pub fn calibrate(&self, s: &Score, guess: f64) -> Result<(Vec<f64>, f64)> {
        let eval = |t: f64| {
            let x = self.candidate(s, t);
            let (g, target) = self.measure(&x);
            (x, g, target)
        };
        let (x0, g0, target) = eval(0.0);
        let scale = target.abs().max(f64::MIN_POSITIVE);
        let tol = 1e-13 * scale;
        if g0 >= target - tol {
            if g0 <= target + 1e-9 * scale {
                return Ok((x0, 0.0));
            }
            return Err(Error::input("the class is empty: its lower envelope violates the constraint"));
        }
        let mut hi = if guess > 0.0 && guess.is_finite() { guess } else { 1.0 };
        let (mut xh, mut gh, _) = eval(hi);
        let mut lo;
        if gh >= target {
            loop {
                let t = 0.5 * hi;
                let (x, g, _) = eval(t);
                if g < target || t < 1e-300 {
                    lo = t;
                    break;
                }
                hi = t;
                xh = x;
                gh = g;
            }
        } else {
            loop {
                lo = hi;
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::ClassInapplicable(
                        "the class constraint cannot be met by the candidate family".into(),
                    ));
                }
                let (x, g, _) = eval(hi);
                xh = x;
                gh = g;
                if gh >= target {
                    break;
                }
            }
        }
        for _ in 0..200 {
            if gh - target <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            let (x, g, _) = eval(mid);
            if g >= target {
                hi = mid;
                xh = x;
                gh = g;
            } else {
                lo = mid;
            }
        }
        Ok((xh, hi))
    }

    /// Largest relative violation of the class constraints by `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let xmax = x.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let neg = x.iter().cloned().fold(0.0, f64::min).abs() / xmax;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        let below = |lo: &[f64]| x.iter().zip(lo).map(|(a, b)| (b - a).max(0.0)).fold(0.0, f64::max) / xmax;
        let above = |hi: &[f64]| x.iter().zip(hi).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max) / xmax;
        let v = match self {
            Sampled::Power(p) => rel(mean(x), *p),
            Sampled::Band { lower, upper, power, inverse } => {
                let m = if *inverse { inverse_mean(x) } else { mean(x) };
                rel(m, *power).max(below(lower)).max(above(upper))
            }
            Sampled::Above { floor, power } => rel(mean(x), *power).max(below(floor)),
            Sampled::Ball { center, eps, squared } => {
                let d = distance_abs(x, center, *squared);
                (d - eps).max(0.0) / eps.max(f64::MIN_POSITIVE)
            }
            Sampled::Moments { moments, inverse } => {
                let y: Vec<f64> = if *inverse { x.iter().map(|v| 1.0 / v).collect() } else { x.to_vec() };
                let got = cos_moments(&y, moments.len() - 1);
                got.iter()
                    .zip(moments)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    / moments[0]
            }
            Sampled::InversePower(p) => rel(inverse_mean(x), *p),
            Sampled::Fixed(v) => {
                let vmax = v.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                x.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / vmax
            }
        };
        v.max(neg)
    }

    /// A random feasible member near `base`, driven by the smooth
    /// log-perturbation `pert` and the generator.
    pub fn perturb<R: Rng>(&self, base: &[f64], pert: &[f64], rng: &mut R) -> Vec<f64> {
        let m = base.len();
        let tilt: Vec<f64> = base.iter().zip(pert).map(|(b, p)| b * p.exp()).collect();
        let radius: f64 = rng.random_range(0.5..=1.0);
        match self {
            Sampled::Power(p) => {
                let s = p / mean(&tilt);
                tilt.iter().map(|x| x * s).collect()
            }
            Sampled::InversePower(p) => {
                let s = inverse_mean(&tilt) / p;
                tilt.iter().map(|x| x * s).collect()
            }
            Sampled::Band { lower, upper, power, inverse } => {
                let clip = |s: f64| -> Vec<f64> {
                    tilt.iter().zip(lower.iter().zip(upper)).map(|(x, (v, u))| (x * s).min(*u).max(*v)).collect()
                };
                let g = |s: f64| if *inverse { -inverse_mean(&clip(s)) } else { mean(&clip(s)) };
                let target = if *inverse { -power } else { *power };
                clip(monotone_solve(g, target))
            }
            Sampled::Above { floor, power } => {
                let gap: Vec<f64> = base.iter().zip(floor).map(|(b, f)| (b - f).max(0.0)).collect();
                let lift = rng.random_range(0.0..0.5) * mean(&gap).max(f64::MIN_POSITIVE);
                let excess: Vec<f64> = gap.iter().zip(pert).map(|(g, p)| (g + lift) * p.exp()).collect();
                let need = power - mean(floor);
                let s = need / mean(&excess);
                floor.iter().zip(&excess).map(|(f, e)| f + s * e).collect()
            }
            Sampled::Ball { center, eps, squared } => {
                let dev: Vec<f64> = base.iter().zip(center).map(|(b, c)| b - c).collect();
                let spread = dev.iter().map(|d| d.abs()).fold(0.0, f64::max).max(eps.sqrt().max(*eps));
                let sign: f64 = rng.random_range(0.1..0.5);
                let dir: Vec<f64> = (0..m)
                    .map(|i| dev[i] * pert[i].exp() + sign * spread * pert[i].sin())
                    .collect();
                let at = |s: f64| -> Vec<f64> { (0..m).map(|i| (center[i] + s * dir[i]).max(0.0)).collect() };
                let g = |s: f64| distance_abs(&at(s), center, *squared);
                at(monotone_solve(g, eps * radius))
            }
            Sampled::Moments { moments, inverse } => {
                let order = moments.len() - 1;
                let y: Vec<f64> = if *inverse { base.iter().map(|v| 1.0 / v).collect() } else { base.to_vec() };
                let mut dir = vec![0.0; m];
                for k in 1..=order + 4 {
                    let b: f64 = rng.sample(StandardNormal);
                    let c: f64 = if k > order { rng.sample(StandardNormal) } else { 0.0 };
                    for (i, d) in dir.iter_mut().enumerate() {
                        let lam = std::f64::consts::PI * (2.0 * i as f64 / m as f64 - 1.0);
                        *d += b * (k as f64 * lam).sin() + c * (k as f64 * lam).cos();
                    }
                }
                let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
                let dmax = dir.iter().map(|d| d.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                let s = 0.9 * radius * ymin / dmax;
                let z: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
                if *inverse {
                    z.iter().map(|v| 1.0 / v).collect()
                } else {
                    z
                }
            }
            Sampled::Fixed(v) => v.clone(),
        }
    }
}

/// `s ≥ 0` with `g(s) = target` for nondecreasing `g` with `g(0) ≤ target`.
fn monotone_solve<G: Fn(f64) -> f64>(g: G, target: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while g(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if g(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

pub(crate) fn inverse_mean(x: &[f64]) -> f64 {
    x.iter().map(|v| 1.0 / v).sum::<f64>() / x.len() as f64
}

/// `mean |x − c|` or `mean (x − c)²`.
fn distance_abs(x: &[f64], c: &[f64], squared: bool) -> f64 {
    let s: f64 = x
        .iter()
        .zip(c)
        .map(|(a, b)| if squared { (a - b) * (a - b) } else { (a - b).abs() })
        .sum();
    s / x.len() as f64
}

/// `mean x cos(kλ)` for `k = 0..=order`.
pub(crate) fn cos_moments(x: &[f64], order: usize) -> Vec<f64> {
    let m = x.len();
    (0..=order)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, v)| {
                    let lam = std::f64::consts::PI * (2.0 * i as f64 / m as f64 - 1.0);
                    v * (k as f64 * lam).cos()
                })
                .sum::<f64>()
                / m as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat(m: usize, c: f64) -> Vec<f64> {
        vec![c; m]
    }

    #[test]
    fn ball_root_solves_both_powers() {
        for &(c, o, k) in &[(1.0, 0.0, 2.0), (0.3, 0.7, 0.01), (0.0, 0.2, 5.0)] {
            for p in [1, 2] {
                let x = ball_root(c, o, k, p);
                assert!(((x - c) * (x + o).powi(p) - k).abs() < 1e-12 * k.max(1.0));
            }
        }
    }

    #[test]
    fn calibration_meets_each_constraint() {
        let m = 256;
        let q: Vec<f64> = (0..m).map(|i| 1.0 + 0.5 * (i as f64 * 0.05).cos()).collect();
        let s = Score { q, offset: flat(m, 0.0), power: 1 };
        let classes = vec![
            Sampled::Power(2.0),
            Sampled::Band { lower: flat(m, 0.5), upper: flat(m, 3.0), power: 1.5, inverse: false },
            Sampled::Band { lower: flat(m, 0.5), upper: flat(m, 3.0), power: 1.0, inverse: true },
            Sampled::Above { floor: flat(m, 0.4), power: 1.0 },
            Sampled::Ball { center: flat(m, 1.0), eps: 0.2, squared: false },
            Sampled::Ball { center: flat(m, 1.0), eps: 0.2, squared: true },
        ];
        for c in classes {
            let (x, _) = c.calibrate(&s, 1.0).unwrap();
            assert!(c.violation(&x) < 1e-10, "{c:?}");
        }
    }

    #[test]
    fn empty_band_is_rejected() {
        let g = Grid::new(64).unwrap();
        let c = DensityClass::Dvu {
            lower: SpectralDensity::white(2.0),
            upper: SpectralDensity::white(3.0),
            power: 1.0,
        };
        assert!(c.sample(&g, false).is_err());
    }

    #[test]
    fn perturbations_stay_in_the_class() {
        let m = 512;
        let base: Vec<f64> = (0..m).map(|i| 1.0 + 0.3 * (i as f64 * 0.02).sin()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let classes = vec![
            Sampled::Power(mean(&base)),
            Sampled::InversePower(inverse_mean(&base)),
            Sampled::Band { lower: flat(m, 0.6), upper: flat(m, 1.5), power: mean(&base), inverse: false },
            Sampled::Band { lower: flat(m, 0.6), upper: flat(m, 1.5), power: inverse_mean(&base), inverse: true },
            Sampled::Above { floor: flat(m, 0.5), power: mean(&base) },
            Sampled::Ball { center: flat(m, 1.0), eps: 0.1, squared: false },
            Sampled::Ball { center: flat(m, 1.0), eps: 0.1, squared: true },
            Sampled::Moments { moments: cos_moments(&base, 2), inverse: false },
        ];
        for c in classes {
            for _ in 0..5 {
                let pert: Vec<f64> = (0..m).map(|i| 0.3 * (i as f64 * 0.013 + rng.random::<f64>()).cos()).collect();
                let x = c.perturb(&base, &pert, &mut rng);
                assert!(c.violation(&x) < 1e-9, "{c:?} {}", c.violation(&x));
            }
        }
    }
}
