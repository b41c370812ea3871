//! Closed-form least favourable densities: the moving average of the power
//! class for extrapolation, and the autoregressions of the inverse-power and
//! inverse-moment classes for interpolation.

use super::classes::{check_positive_sequence, cos_moments, inverse_mean, DensityClass};
use super::fixed::{extrap_plan, extrap_score};
use super::{Candidate, MinimaxConfig, MinimaxSolution, Residuals};
use crate::coefs::CoefSeq;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use crate::game::solve_game;
use crate::interpolation::interpolate_samples;
use crate::operators::HankelMatrix;
use crate::plan::Problem;
use crate::spectra::{mean, synthesize, Coeffs, Factorization, Grid};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Functional truncated or padded to order `n` as in the game solver.
fn functional(a: &CoefSeq, n: Option<usize>) -> Result<Vec<C64>> {
    a.validate()?;
    let a = match n {
        Some(n) if a.is_finite() => {
            if n < a.order() {
                return Err(Error::input(format!("order {n} is shorter than the functional")));
            }
            a.clone()
        }
        Some(n) => a.with_truncation(n),
        None => a.clone(),
    };
    a.certify()?;
    let mut v = a.values();
    v.resize(n.unwrap_or(v.len()), ZERO);
    Ok(v)
}

/// Top solution of `H d = α conj(d)` through the real symmetric form
/// `[[Re H, −Im H], [−Im H, −Re H]]`, with `‖d‖ = 1`.
fn takagi_top(a: &[C64]) -> (f64, Vec<C64>) {
    let n = a.len();
    let h = HankelMatrix::new(a, n).to_dense();
    let s = DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i / n, j / n) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => -z.im,
        }
    });
    let e = SymmetricEigen::new(s);
    let k = e.eigenvalues.imax();
    let v = e.eigenvectors.column(k);
    let mut d: Vec<C64> = (0..n).map(|i| C64::new(v[i], v[n + i])).collect();
    let big = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = d.iter().find(|z| z.norm() > 1e-8 * big) {
        let neg = if z.re.abs() > 1e-12 * big { z.re < 0.0 } else { z.im < 0.0 };
        if neg {
            d.iter_mut().for_each(|z| *z = -*z);
        }
    }
    (e.eigenvalues[k], d)
}

/// Largest complex order handled by the dense real form.
const TAKAGI_MAX: usize = 512;

/// Least favourable density of the power class `mean f = power` for
/// extrapolation: `f⁰ = |Σ d⁰(k) e^{−ikλ}|²` with `d⁰` the top solution of
/// `H d = α conj(d)` scaled to `‖d⁰‖² = power`; the value is `α² power`.
pub fn lf_extrap_d0(a: &CoefSeq, power: f64, n: Option<usize>, cfg: &MinimaxConfig) -> Result<MinimaxSolution> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::input(format!("power must be positive, got {power}")));
    }
    let grid = Grid::new(cfg.grid)?;
    let m = grid.size();
    let vals = functional(a, n)?;
    let real = vals.iter().all(|z| z.im == 0.0);
    let (value, d) = if real {
        let g = solve_game(&CoefSeq::finite(vals.clone()), power, None)?;
        (g.value, g.least_favourable.d)
    } else {
        if vals.len() > TAKAGI_MAX {
            return Err(Error::Unsupported(format!(
                "complex functionals of order above {TAKAGI_MAX} are not supported"
            )));
        }
        let (alpha, unit) = takagi_top(&vals);
        let s = power.sqrt();
        (alpha * alpha * power, unit.iter().map(|z| z * s).collect())
    };
    if d.is_empty() {
        return Err(Error::input("the functional vanishes identically"));
    }
    let f0: Vec<f64> = Factorization::from_ma(d).phi_on_grid(m).iter().map(|z| z.norm_sqr()).collect();
    let mut h0 = extrap_plan(&f0, &vals, cfg.trunc)?;
    let mut warnings = std::mem::take(&mut h0.warnings);
    if (h0.delta - value).abs() > 1e-6 * value {
        warnings.push(format!(
            "the maximizing moving average is not outer: value {value} but error {} under its density",
            h0.delta
        ));
    }
    // Defining equation: f⁰ proportional to |Σ (A d⁰)_k e^{ikλ}|².
    let score = extrap_score(&f0, &vals)?;
    let s = mean(&f0) / mean(&score.q).max(f64::MIN_POSITIVE);
    let fmax = f0.iter().cloned().fold(0.0, f64::max);
    let fixedpoint = f0.iter().zip(&score.q).map(|(f, q)| (f - s * q).abs()).fold(0.0, f64::max) / fmax;
    h0.warnings = vec![];
    Ok(MinimaxSolution {
        problem: Problem::Extrapolation,
        class: DensityClass::D0 { power },
        noise_class: None,
        residuals: Residuals {
            fixedpoint,
            constraint: (mean(&f0) - power).abs() / power,
            saddle_lo: None,
            saddle_hi: None,
        },
        lf_density: f0,
        lf_noise: None,
        h0,
        game_value: value,
        candidates: vec![Candidate { label: "moving average".into(), delta: value, feasible: true }],
        iterations: 0,
        trace: vec![],
        warnings,
    })
}

pub(crate) fn finite_values(a: &CoefSeq) -> Result<Vec<C64>> {
    a.validate()?;
    match a {
        CoefSeq::Finite { coeffs } => Ok(coeffs.clone()),
        _ => Err(Error::Unsupported("interpolation needs a finite functional".into())),
    }
}

/// `Σ_{|k|≤N} r_k e^{ikλ}` with `r_{−k} = conj(r_k)`.
fn hermitian_poly(r: &[C64], m: usize) -> Vec<f64> {
    let n = r.len() as i64 - 1;
    let mut v: Vec<C64> = r.iter().skip(1).rev().map(|z| z.conj()).collect();
    v.extend_from_slice(r);
    synthesize(&Coeffs::new(-n, v), m).iter().map(|z| z.re).collect()
}

fn hermitian_positive(r: &[C64]) -> bool {
    let n = r.len();
    let t = DMatrix::from_fn(n, n, |j, k| if j >= k { r[j - k] } else { r[k - j].conj() });
    let lo = SymmetricEigen::new(t).eigenvalues.min();
    lo > 1e-12 * r[0].re.abs()
}

/// Autoregressive candidate `1/f = Σ r_k e^{ikλ}` if the sequence is
/// strictly positive and the polynomial positive on the grid.
fn ar_candidate(r: &[C64], m: usize) -> Option<Vec<f64>> {
    if !hermitian_positive(r) {
        return None;
    }
    let inv = hermitian_poly(r, m);
    let top = inv.iter().cloned().fold(0.0, f64::max);
    if inv.iter().any(|x| !(*x > 1e-12 * top)) {
        return None;
    }
    Some(inv.iter().map(|x| 1.0 / x).collect())
}

fn ar_solution(
    class: DensityClass,
    f0: Vec<f64>,
    vals: &[C64],
    constraint: f64,
    candidates: Vec<Candidate>,
    cfg: &MinimaxConfig,
) -> Result<MinimaxSolution> {
    let mut h0 = interpolate_samples(&f0, vals, cfg.trunc)?;
    let warnings = std::mem::take(&mut h0.warnings);
    Ok(MinimaxSolution {
        problem: Problem::Interpolation,
        class,
        noise_class: None,
        game_value: h0.delta,
        residuals: Residuals { fixedpoint: 0.0, constraint, saddle_lo: None, saddle_hi: None },
        lf_density: f0,
        lf_noise: None,
        h0,
        candidates,
        iterations: 0,
        trace: vec![],
        warnings,
    })
}

/// Least favourable density of the class `mean 1/f = power` for
/// interpolation of `a(0..=N)`: the autoregression with
/// `r_k = power·a(k)/a(0)`, or with the reversed coefficients
/// `r_k = power·conj(a(N−k))/conj(a(N))`. The characteristic is
/// `h⁰ = A − (a(0)/power) / f⁰` (respectively `A − (a(N)/power) e^{iNλ}/f⁰`).
/// When both orderings qualify the one with the larger error is returned.
pub fn lf_interp_d0minus(a: &CoefSeq, power: f64, cfg: &MinimaxConfig) -> Result<MinimaxSolution> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::input(format!("power must be positive, got {power}")));
    }
    let m = Grid::new(cfg.grid)?.size();
    let vals = finite_values(a)?;
    let n = vals.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut candidates = vec![];
    let orders: [(&str, Box<dyn Fn() -> Option<Vec<C64>>>); 2] = [
        (
            "forward",
            Box::new(|| (vals[0].norm() > 0.0).then(|| vals.iter().map(|z| z / vals[0] * power).collect())),
        ),
        (
            "reversed",
            Box::new(|| {
                let last = vals[n - 1];
                (last.norm() > 0.0).then(|| (0..n).map(|k| (vals[n - 1 - k] / last).conj() * power).collect())
            }),
        ),
    ];
    for (label, make) in orders.iter() {
        let f0 = make().and_then(|r| ar_candidate(&r, m));
        let delta = match &f0 {
            Some(f) => interpolate_samples(f, &vals, cfg.trunc).map(|p| p.delta).ok(),
            None => None,
        };
        candidates.push(Candidate {
            label: (*label).into(),
            delta: delta.unwrap_or(f64::NAN),
            feasible: delta.is_some(),
        });
        if let (Some(f), Some(d)) = (f0, delta) {
            if best.as_ref().map_or(true, |(_, b)| d > *b) {
                best = Some((f, d));
            }
        }
    }
    candidates.retain(|c| c.feasible);
    let (f0, _) = best.ok_or_else(|| {
        Error::ClassInapplicable(
            "neither the coefficients nor their reversal form a strictly positive sequence; \
             use the fixed-point solver"
                .into(),
        )
    })?;
    let constraint = (inverse_mean(&f0) - power).abs() / power;
    ar_solution(DensityClass::D0minus { power }, f0, &vals, constraint, candidates, cfg)
}

/// Least favourable density of the class fixing the cosine moments
/// `r_0..r_M` of `1/f` for interpolation of real `a(0..=N)`.
///
/// For `M ≥ N` it is the autoregression `1/f⁰ = Σ_{|m|≤M} r_{|m|} e^{imλ}`.
/// For `M < N` the moments `r_{M+1..N}` are completed from
/// `B_N p = a` with `p` supported on `0..=M` (or on `N−M..=N`), and the
/// completed sequence must again be strictly positive.
pub fn lf_interp_moments(a: &CoefSeq, moments: &[f64], cfg: &MinimaxConfig) -> Result<MinimaxSolution> {
    let grid = Grid::new(cfg.grid)?;
    let m = grid.size();
    let vals = finite_values(a)?;
    if vals.iter().any(|z| z.im != 0.0) {
        return Err(Error::Unsupported("the moment class needs a real functional".into()));
    }
    let class = DensityClass::DM { moments: moments.to_vec() };
    class.sample(&grid, true)?;
    let av: Vec<f64> = vals.iter().map(|z| z.re).collect();
    let big_n = av.len() - 1;
    let order = moments.len() - 1;
    let as_c = |r: &[f64]| r.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>();
    let mut candidates = vec![];
    let f0 = if order >= big_n {
        candidates.push(Candidate { label: "given moments".into(), delta: f64::NAN, feasible: true });
        ar_candidate(&as_c(moments), m)
    } else {
        let forward: Vec<usize> = (0..=order).collect();
        let reversed: Vec<usize> = (big_n - order..=big_n).collect();
        let mut found = None;
        for (label, support) in [("forward", forward), ("reversed", reversed)] {
            let full = complete_moments(moments, &av, &support);
            let f = full.as_deref().and_then(|r| {
                check_positive_sequence(r).ok()?;
                ar_candidate(&as_c(r), m)
            });
            candidates.push(Candidate { label: label.into(), delta: f64::NAN, feasible: f.is_some() });
            if f.is_some() {
                found = f;
                break;
            }
        }
        found
    };
    let f0 = f0.ok_or_else(|| {
        Error::ClassInapplicable("the completed moment sequence is not strictly positive".into())
    })?;
    let got = cos_moments(&f0.iter().map(|x| 1.0 / x).collect::<Vec<_>>(), order);
    let constraint = got.iter().zip(moments).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / moments[0];
    let mut sol = ar_solution(class, f0, &vals, constraint, candidates, cfg)?;
    for c in sol.candidates.iter_mut().filter(|c| c.feasible) {
        c.delta = sol.game_value;
    }
    Ok(sol)
}

/// Solves `Σ_{k∈S} r_{|j−k|} p_k = a_j`, `j = 0..=N`, for `p` on the
/// support `S` and the unknown `r_{M+1..=N}` by Newton's method.
fn complete_moments(r: &[f64], a: &[f64], support: &[usize]) -> Option<Vec<f64>> {
    let big_n = a.len() - 1;
    let order = r.len() - 1;
    let np = support.len();
    let mut full = r.to_vec();
    full.resize(big_n + 1, 0.0);
    // start from the square subsystem on the support, which uses known moments only
    let sub = DMatrix::from_fn(np, np, |i, k| full[support[i].abs_diff(support[k])]);
    let rhs = DVector::from_iterator(np, support.iter().map(|&j| a[j]));
    let mut p: Vec<f64> = sub.lu().solve(&rhs)?.iter().cloned().collect();
    let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let resid: Vec<f64> = (0..=big_n)
            .map(|j| support.iter().zip(&p).map(|(&k, pk)| full[j.abs_diff(k)] * pk).sum::<f64>() - a[j])
            .collect();
        if resid.iter().all(|x| x.abs() <= 1e-13 * scale) {
            return Some(full);
        }
        let jac = DMatrix::from_fn(big_n + 1, big_n + 1, |j, c| {
            if c < np {
                full[j.abs_diff(support[c])]
            } else {
                let lag = order + 1 + (c - np);
                support.iter().zip(&p).filter(|(&k, _)| j.abs_diff(k) == lag).map(|(_, pk)| pk).sum()
            }
        });
        let step = jac.lu().solve(&DVector::from_vec(resid))?;
        for (c, s) in step.iter().enumerate() {
            if c < np {
                p[c] -= s;
            } else {
                full[order + 1 + c - np] -= s;
            }
        }
    }
    None
}
