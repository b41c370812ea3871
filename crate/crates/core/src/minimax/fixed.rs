//! Damped fixed-point iteration for classes given by pointwise formulas,
//! for a single density and for a signal/noise pair.
//!
//! Each step computes the error gradient of the current density, forms the
//! class candidate from it and calibrates the free scale against the class
//! constraint. The gradient is `|r|²/f` for extrapolation with
//! `r = Σ (Ad)_k e^{ikλ}`, `|C|²/f²` for interpolation with `c = B_N⁻¹ a`,
//! and `|A g + C|²/(f+g)²` (signal) or `|A f − C|²/(f+g)²` (noise) in the
//! noisy problems.

use super::classes::{DensityClass, Sampled, Score};
use super::closed::{finite_values, lf_extrap_d0, lf_interp_d0minus, lf_interp_moments};
use super::{Candidate, MinimaxConfig, MinimaxSolution, Residuals};
use crate::coefs::CoefSeq;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, ErrorKind, Result};
use crate::extrapolation::{
    ad_coeffs, check_minimality, noisy_solve, noisy_symbols, predict_noisy_samples, predict_with_factor,
};
use crate::interpolation::{interpolate_noisy_samples, interpolate_samples};
use crate::operators::{build_toeplitz, solve_hpd};
use crate::plan::{EstimatePlan, Problem};
use crate::spectra::{
    factorize_samples, fourier_coeffs, mean, synthesize, Coeffs, Grid, Transform, DEFAULT_FACTOR_TOL,
};
use nalgebra::{DMatrix, DVector};

/// Scores below this fraction of their natural scale count as zero: every
/// member of the class is then equally unfavourable.
const DEGENERATE_SCORE: f64 = 1e-24;

fn sup(x: &[f64]) -> f64 {
    x.iter().cloned().fold(0.0, f64::max)
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let top = sup(new).max(f64::MIN_POSITIVE);
    new.iter().zip(old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / top
}

pub(crate) fn extrap_score(f: &[f64], a: &[C64]) -> Result<Score> {
    let m = f.len();
    let l = (a.len() - 1).min(m / 2 - 1);
    let fact = factorize_samples(f, l, f64::INFINITY)?;
    let r = synthesize(&Coeffs::causal(ad_coeffs(a, &fact.d)), m);
    Ok(Score { q: r.iter().map(|z| z.norm_sqr()).collect(), offset: vec![0.0; m], power: 1 })
}

pub(crate) fn interp_score(f: &[f64], a: &[C64]) -> Result<Score> {
    let m = f.len();
    check_minimality(f)?;
    let n = a.len();
    let b = build_toeplitz(&fourier_coeffs(f, Transform::OfInvF, n)?, n)?;
    let c = solve_hpd(&b, a)?.x;
    let big_c = synthesize(&Coeffs::causal(c), m);
    Ok(Score { q: big_c.iter().map(|z| z.norm_sqr()).collect(), offset: vec![0.0; m], power: 2 })
}

/// Signal and noise scores at operator order `order`.
pub(crate) fn noisy_scores(f: &[f64], g: &[f64], a: &[C64], order: usize) -> Result<(Score, Score)> {
    let m = f.len();
    let sym = noisy_symbols(f, g, order)?;
    let mut ap = a.to_vec();
    ap.resize(order, ZERO);
    let sol = noisy_solve(&sym, &ap)?;
    let big_a = synthesize(&Coeffs::causal(a.to_vec()), m);
    let big_c = synthesize(&Coeffs::causal(sol.c), m);
    let sf = (0..m).map(|i| (big_a[i] * g[i] + big_c[i]).norm_sqr()).collect();
    let sg = (0..m).map(|i| (big_a[i] * f[i] - big_c[i]).norm_sqr()).collect();
    Ok((
        Score { q: sf, offset: g.to_vec(), power: 2 },
        Score { q: sg, offset: f.to_vec(), power: 2 },
    ))
}

/// `q/Λ` with `Λ(λ) = Σ_{k≤M} α_k cos(kλ)` such that its cosine moments
/// equal `moments`; Newton's method on the convex dual
/// `Σ α_k r_k − mean(q ln Λ)`.
pub(crate) fn moment_fit(q: &[f64], moments: &[f64]) -> Result<Vec<f64>> {
    let m = q.len();
    let order = moments.len() - 1;
    let r0 = moments[0];
    let cos: Vec<Vec<f64>> = (0..=order)
        .map(|k| {
            (0..m)
                .map(|i| (k as f64 * std::f64::consts::PI * (2.0 * i as f64 / m as f64 - 1.0)).cos())
                .collect()
        })
        .collect();
    let lam_of = |al: &[f64]| -> Vec<f64> { (0..m).map(|i| (0..=order).map(|k| al[k] * cos[k][i]).sum()).collect() };
    let dual = |al: &[f64], l: &[f64]| -> f64 {
        let lin: f64 = al.iter().zip(moments).map(|(a, r)| a * r).sum();
        let log: f64 = q.iter().zip(l).filter(|(w, _)| **w > 0.0).map(|(w, x)| w * x.ln()).sum();
        lin - log / m as f64
    };
    let mut alpha = vec![0.0; order + 1];
    alpha[0] = mean(q) / r0;
    let mut l = lam_of(&alpha);
    let mut obj = dual(&alpha, &l);
    let mut gnorm = f64::INFINITY;
    let mut trace = vec![];
    for _ in 0..200 {
        let grad: Vec<f64> = (0..=order)
            .map(|k| moments[k] - (0..m).map(|i| q[i] * cos[k][i] / l[i]).sum::<f64>() / m as f64)
            .collect();
        gnorm = grad.iter().map(|x| x.abs()).fold(0.0, f64::max);
        trace.push(gnorm);
        if gnorm <= 1e-12 * r0 {
            break;
        }
        let h = DMatrix::from_fn(order + 1, order + 1, |j, k| {
            (0..m).map(|i| q[i] * cos[j][i] * cos[k][i] / (l[i] * l[i])).sum::<f64>() / m as f64
        });
        let g = DVector::from_vec(grad.clone());
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => h.lu().solve(&g).ok_or(Error::Conditioning { condition: f64::INFINITY })?,
        };
        let slope: f64 = -grad.iter().zip(step.iter()).map(|(a, b)| a * b).sum::<f64>();
        let mut s = 1.0;
        let mut moved = false;
        while s > 1e-12 {
            let trial: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, d)| a - s * d).collect();
            let lt = lam_of(&trial);
            if lt.iter().all(|x| *x > 0.0) {
                let ot = dual(&trial, &lt);
                if ot <= obj + 1e-4 * s * slope {
                    alpha = trial;
                    l = lt;
                    obj = ot;
                    moved = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !moved {
            break;
        }
    }
    if !(gnorm <= 1e-9 * r0) {
        return Err(Error::NonConvergence { iterations: trace.len(), residual: gnorm / r0, trace });
    }
    Ok(q.iter().zip(&l).map(|(w, x)| w / x).collect())
}

pub(crate) fn extrap_plan(f: &[f64], a: &[C64], l: usize) -> Result<EstimatePlan> {
    let fact = factorize_samples(f, l, f64::INFINITY)?;
    let mut plan = predict_with_factor(f, &fact, a, l);
    if fact.residual > DEFAULT_FACTOR_TOL {
        plan.warnings.push(format!(
            "factorization residual {:.2e} at truncation {l} exceeds {DEFAULT_FACTOR_TOL:.0e}",
            fact.residual
        ));
    }
    if fact.clamped > 0 {
        plan.warnings.push(format!("{} density samples clamped at the floor", fact.clamped));
    }
    Ok(plan)
}

fn final_plan(problem: Problem, f: &[f64], g: Option<&[f64]>, a: &[C64], l: usize) -> Result<EstimatePlan> {
    match (problem, g) {
        (Problem::Extrapolation, _) => extrap_plan(f, a, l),
        (Problem::Interpolation, _) => interpolate_samples(f, a, l),
        (Problem::ExtrapolationNoisy, Some(g)) => predict_noisy_samples(f, g, &CoefSeq::finite(a.to_vec()), l),
        (Problem::InterpolationNoisy, Some(g)) => interpolate_noisy_samples(f, g, a, l),
        _ => Err(Error::input("noisy problem without a noise density")),
    }
}

struct Outcome {
    state: Vec<Vec<f64>>,
    iterations: usize,
    trace: Vec<f64>,
}

/// Anderson mixing over the last few sweeps, restarted whenever the
/// residual grows well past its best value.
struct Anderson {
    depth: usize,
    dx: Vec<DVector<f64>>,
    dr: Vec<DVector<f64>>,
    prev: Option<(DVector<f64>, DVector<f64>)>,
    best: f64,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson { depth, dx: vec![], dr: vec![], prev: None, best: f64::INFINITY }
    }

    fn reset(&mut self) {
        self.dx.clear();
        self.dr.clear();
        self.prev = None;
    }

    /// Next iterate from the current one and its image under the sweep.
    fn step(&mut self, x: DVector<f64>, fx: DVector<f64>, change: f64) -> DVector<f64> {
        if self.depth == 0 {
            return fx;
        }
        if change > 10.0 * self.best {
            self.reset();
        }
        self.best = self.best.min(change);
        let r = &fx - &x;
        if let Some((px, pr)) = self.prev.take() {
            self.dx.push(&x - px);
            self.dr.push(&r - pr);
            if self.dx.len() > self.depth {
                self.dx.remove(0);
                self.dr.remove(0);
            }
        }
        self.prev = Some((x.clone(), r.clone()));
        if self.dx.is_empty() {
            return fx;
        }
        let big_r = DMatrix::from_columns(&self.dr);
        let gamma = match big_r.clone().svd(true, true).solve(&r, 1e-10 * big_r.norm()) {
            Ok(g) => g,
            Err(_) => {
                self.reset();
                return fx;
            }
        };
        let mut next = x + r;
        for (k, gk) in gamma.iter().enumerate() {
            next -= (&self.dx[k] + &self.dr[k]) * *gk;
        }
        next.apply(|v| *v = v.max(0.0));
        next
    }
}

/// Gauss–Seidel sweeps over the active members with damped updates and
/// Anderson mixing; on convergence the last undamped candidates are
/// returned.
fn iterate<T>(init: Vec<Vec<f64>>, active: &[bool], cfg: &MinimaxConfig, map: &mut T) -> Result<Outcome>
where
    T: FnMut(&[Vec<f64>], usize) -> Result<Vec<f64>>,
{
    let mut state = init;
    let mut latest = state.clone();
    let mut trace = vec![];
    if !active.iter().any(|&x| x) {
        return Ok(Outcome { state, iterations: 0, trace });
    }
    let m = state[0].len();
    let parts = state.len();
    let flat = |st: &[Vec<f64>]| DVector::from_iterator(m * parts, st.iter().flatten().cloned());
    let mut accel = Anderson::new(cfg.accel);
    for it in 1..=cfg.max_iter {
        let x = flat(&state);
        let mut change: f64 = 0.0;
        for i in 0..parts {
            if !active[i] {
                continue;
            }
            let t = map(&state, i)?;
            change = change.max(rel_change(&t, &state[i]));
            let b = cfg.damping;
            for (s, x) in state[i].iter_mut().zip(&t) {
                *s = (1.0 - b) * *s + b * x;
            }
            latest[i] = t;
        }
        trace.push(change);
        if change < cfg.tol {
            for i in 0..parts {
                if active[i] {
                    state[i] = std::mem::take(&mut latest[i]);
                }
            }
            return Ok(Outcome { state, iterations: it, trace });
        }
        let next = accel.step(x, flat(&state), change);
        for (i, s) in state.iter_mut().enumerate() {
            s.copy_from_slice(&next.as_slice()[i * m..(i + 1) * m]);
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: trace.last().cloned().unwrap_or(f64::NAN),
        trace,
    })
}

fn abs_sum(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).sum()
}

fn flat_score(m: usize, power: i32) -> Score {
    Score { q: vec![1.0; m], offset: vec![0.0; m], power }
}

/// Power carried by the moving-average candidate of a class, when the class
/// fixes the mean of the density.
fn class_power(s: &Sampled) -> Option<f64> {
    match s {
        Sampled::Power(p) | Sampled::Above { power: p, .. } => Some(*p),
        Sampled::Band { power, inverse: false, .. } => Some(*power),
        Sampled::Ball { center, eps, squared: false } => Some(mean(center) + eps),
        Sampled::Moments { moments, .. } => Some(moments[0]),
        _ => None,
    }
}

/// Least favourable density of a single-density class by damped fixed-point
/// iteration. The power class for extrapolation, the inverse-power class and
/// the inverse-moment class for interpolation are delegated to their closed
/// forms. For extrapolation the moving-average density of the power class is
/// also tried; when it belongs to the class it is least favourable and the
/// candidate with the larger error is returned.
pub fn lf_fixed_point(
    a: &CoefSeq,
    class: &DensityClass,
    problem: Problem,
    cfg: &MinimaxConfig,
) -> Result<MinimaxSolution> {
    cfg.validate()?;
    if problem.is_noisy() {
        return Err(Error::input("noisy problems need a noise class"));
    }
    let interp = problem.is_interpolation();
    match (class, interp) {
        (DensityClass::D0 { power }, false) => return lf_extrap_d0(a, *power, None, cfg),
        (DensityClass::D0minus { power }, true) => return lf_interp_d0minus(a, *power, cfg),
        (DensityClass::DM { moments }, true) => return lf_interp_moments(a, moments, cfg),
        (DensityClass::D0minus { .. } | DensityClass::DvuMinus { .. }, false) => {
            return Err(Error::input(format!("class {} applies to interpolation only", class.name())))
        }
        _ => {}
    }
    let grid = Grid::new(cfg.grid)?;
    let m = grid.size();
    let vals = if interp {
        finite_values(a)?
    } else {
        a.certify()?;
        a.values()
    };
    let sampled = class.sample(&grid, interp)?;
    let mut candidates = vec![];
    let mut warnings = vec![];

    if let (DensityClass::DvuMinus { power, .. }, Sampled::Band { lower, upper, .. }) = (class, &sampled) {
        match lf_interp_d0minus(a, *power, cfg) {
            Ok(mut s) => {
                let inside = s
                    .lf_density
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(f, (v, u))| *f >= v * (1.0 - 1e-12) && *f <= u * (1.0 + 1e-12));
                candidates.push(Candidate { label: "autoregression".into(), delta: s.game_value, feasible: inside });
                if inside {
                    s.class = class.clone();
                    s.residuals.constraint = sampled.violation(&s.lf_density);
                    s.candidates = candidates;
                    return Ok(s);
                }
            }
            Err(e) if e.kind() == ErrorKind::ClassInapplicable => {}
            Err(e) => return Err(e),
        }
    }

    let power = if interp { 2 } else { 1 };
    let scale = abs_sum(&vals).powi(2);
    let mut guess = 1.0;
    let mut map = |st: &[Vec<f64>], _: usize| -> Result<Vec<f64>> {
        let f = &st[0];
        if let Sampled::Fixed(v) = &sampled {
            return Ok(v.clone());
        }
        let s = if interp { interp_score(f, &vals)? } else { extrap_score(f, &vals)? };
        if sup(&s.q) <= DEGENERATE_SCORE * scale * sup(f).powi(power) {
            return Ok(f.clone());
        }
        match &sampled {
            Sampled::Moments { moments, .. } => moment_fit(&s.q, moments),
            _ => {
                let (x, t) = sampled.calibrate(&s, guess)?;
                guess = t;
                Ok(x)
            }
        }
    };
    let init = match &sampled {
        Sampled::Fixed(v) => v.clone(),
        Sampled::Moments { moments, .. } => moment_fit(&vec![1.0; m], moments)?,
        s if s.has_family() || matches!(s, Sampled::Band { .. }) => s.calibrate(&flat_score(m, power), 1.0)?.0,
        _ => return Err(Error::input(format!("class {} has no fixed-point form", class.name()))),
    };
    let active = [!matches!(sampled, Sampled::Fixed(_))];
    let run = iterate(vec![init], &active, cfg, &mut map).and_then(|out| {
        let f = out.state[0].clone();
        let fixedpoint = rel_change(&map(&out.state, 0)?, &f);
        let plan = final_plan(problem, &f, None, &vals, cfg.trunc)?;
        Ok((f, fixedpoint, plan, out.iterations, out.trace))
    });

    let ma = match class_power(&sampled) {
        Some(p) if !interp => {
            let s = lf_extrap_d0(a, p, None, cfg)?;
            let feasible = sampled.violation(&s.lf_density) <= 1e-8;
            candidates.push(Candidate { label: "moving average".into(), delta: s.game_value, feasible });
            feasible.then_some(s)
        }
        _ => None,
    };
    let (f, fixedpoint, mut plan, iterations, trace) = match (run, ma) {
        (Ok(r), ma) => {
            candidates.push(Candidate { label: "fixed point".into(), delta: r.2.delta, feasible: true });
            match ma {
                Some(mut s) if s.game_value > r.2.delta => {
                    s.class = class.clone();
                    s.residuals.constraint = sampled.violation(&s.lf_density);
                    s.candidates = candidates;
                    return Ok(s);
                }
                _ => r,
            }
        }
        (Err(e), Some(mut s)) => {
            s.class = class.clone();
            s.residuals.constraint = sampled.violation(&s.lf_density);
            s.warnings.push(format!("fixed-point iteration failed: {e}"));
            s.candidates = candidates;
            return Ok(s);
        }
        (Err(e), None) => return Err(e),
    };
    warnings.append(&mut plan.warnings);
    Ok(MinimaxSolution {
        problem,
        class: class.clone(),
        noise_class: None,
        residuals: Residuals {
            fixedpoint,
            constraint: sampled.violation(&f),
            saddle_lo: None,
            saddle_hi: None,
        },
        lf_density: f,
        lf_noise: None,
        game_value: plan.delta,
        h0: plan,
        candidates,
        iterations,
        trace,
        warnings,
    })
}

/// Least favourable signal and noise densities by alternating damped
/// updates. A `Fixed` class pins its member, in which case only the other
/// one is updated.
pub fn lf_noisy_pair(
    a: &CoefSeq,
    fclass: &DensityClass,
    gclass: &DensityClass,
    problem: Problem,
    cfg: &MinimaxConfig,
) -> Result<MinimaxSolution> {
    cfg.validate()?;
    if !problem.is_noisy() {
        return Err(Error::input("the pair solver needs a noisy problem"));
    }
    let grid = Grid::new(cfg.grid)?;
    let m = grid.size();
    let interp = problem.is_interpolation();
    let vals = if interp {
        finite_values(a)?
    } else {
        a.certify()?;
        a.values()
    };
    let order = if interp { vals.len() } else { (cfg.trunc + 1).max(vals.len()) };
    if order > m / 2 - 1 {
        return Err(Error::input(format!("operator order {order} too large for a grid of {m} points")));
    }
    let classes = [fclass.sample(&grid, false)?, gclass.sample(&grid, false)?];
    let mut init = vec![];
    for (c, s) in [fclass, gclass].iter().zip(&classes) {
        init.push(match s {
            Sampled::Fixed(v) => v.clone(),
            s if s.has_family() => s.calibrate(&flat_score(m, 2), 1.0)?.0,
            _ => return Err(Error::input(format!("class {} is not available for noisy problems", c.name()))),
        });
    }
    let active = [!matches!(classes[0], Sampled::Fixed(_)), !matches!(classes[1], Sampled::Fixed(_))];
    let scale = abs_sum(&vals).powi(2);
    let mut guesses = [1.0, 1.0];
    let mut map = |st: &[Vec<f64>], i: usize| -> Result<Vec<f64>> {
        if let Sampled::Fixed(v) = &classes[i] {
            return Ok(v.clone());
        }
        let (sf, sg) = noisy_scores(&st[0], &st[1], &vals, order)?;
        let s = if i == 0 { sf } else { sg };
        let top = st[0].iter().zip(&st[1]).map(|(x, y)| x + y).fold(0.0, f64::max);
        if sup(&s.q) <= DEGENERATE_SCORE * scale * top * top {
            return Ok(st[i].clone());
        }
        let (x, t) = classes[i].calibrate(&s, guesses[i])?;
        guesses[i] = t;
        Ok(x)
    };
    let out = iterate(init, &active, cfg, &mut map)?;
    let mut fixedpoint: f64 = 0.0;
    for i in 0..2 {
        if active[i] {
            fixedpoint = fixedpoint.max(rel_change(&map(&out.state, i)?, &out.state[i]));
        }
    }
    let (f, g) = (out.state[0].clone(), out.state[1].clone());
    let mut plan = final_plan(problem, &f, Some(&g), &vals, cfg.trunc)?;
    let warnings = std::mem::take(&mut plan.warnings);
    Ok(MinimaxSolution {
        problem,
        class: fclass.clone(),
        noise_class: Some(gclass.clone()),
        residuals: Residuals {
            fixedpoint,
            constraint: classes[0].violation(&f).max(classes[1].violation(&g)),
            saddle_lo: None,
            saddle_hi: None,
        },
        lf_density: f,
        lf_noise: Some(g),
        game_value: plan.delta,
        h0: plan,
        candidates: vec![],
        iterations: out.iterations,
        trace: out.trace,
        warnings,
    })
}

/// `sup|f⁰ − T(f⁰)| / max f⁰` for the class map `T`, recomputed from the
/// returned densities; the maximum over the free members for noisy
/// problems. Classes solved in closed form without a pointwise map are
/// unsupported.
pub fn defining_residual(sol: &MinimaxSolution) -> Result<f64> {
    let f = &sol.lf_density;
    let m = f.len();
    let grid = Grid::new(m)?;
    let a = &sol.h0.a;
    let scale = abs_sum(a).powi(2);
    let interp = sol.problem.is_interpolation();
    let apply = |sampled: &Sampled, s: &Score, x: &[f64], top: f64| -> Result<f64> {
        if sup(&s.q) <= DEGENERATE_SCORE * scale * top {
            return Ok(0.0);
        }
        let t = match sampled {
            Sampled::Moments { moments, inverse: false } => moment_fit(&s.q, moments)?,
            s_ if s_.has_family() => sampled.calibrate(s, 1.0)?.0,
            _ => return Err(Error::Unsupported(format!("class {} has no pointwise map", sol.class.name()))),
        };
        Ok(rel_change(&t, x))
    };
    match (&sol.noise_class, &sol.lf_noise) {
        (Some(gclass), Some(g)) => {
            let trunc = (-sol.h0.h_coeffs.lo).max(0) as usize;
            let order = if interp { a.len() } else { (trunc + 1).max(a.len()) };
            let (sf, sg) = noisy_scores(f, g, a, order)?;
            let top = f.iter().zip(g).map(|(x, y)| x + y).fold(0.0, f64::max).powi(2);
            let mut r: f64 = 0.0;
            for (class, s, x) in [(&sol.class, sf, f), (gclass, sg, g)] {
                let sampled = class.sample(&grid, false)?;
                if !matches!(sampled, Sampled::Fixed(_)) {
                    r = r.max(apply(&sampled, &s, x, top)?);
                }
            }
            Ok(r)
        }
        (None, None) => {
            let sampled = sol.class.sample(&grid, interp)?;
            if matches!(sampled, Sampled::Fixed(_)) {
                return Ok(0.0);
            }
            let (s, power) = if interp { (interp_score(f, a)?, 2) } else { (extrap_score(f, a)?, 1) };
            apply(&sampled, &s, f, sup(f).powi(power))
        }
        _ => Err(Error::input("noise class and noise density must come together")),
    }
}
