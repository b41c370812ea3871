//! Extrapolation of `Aξ = Σ_{j≥0} a(j) ξ(j)` from observations at `j < 0`.
//!
//! Without noise the error is `‖Ad‖²` with `d` the outer factor of `f` and
//! `h = A − r/φ`, `r(e^{iλ}) = Σ_k (Ad)_k e^{ikλ}`. With additive noise the
//! characteristic is `h = (A f − C)/(f+g)` where `c = B⁻¹ R a` solves the
//! Toeplitz system built from `1/(f+g)` and `f/(f+g)`.

use crate::coefs::CoefSeq;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use crate::operators::{toeplitz_mul, toeplitz_solve};
use crate::plan::{project, EstimatePlan, Problem};
use crate::spectra::{
    analyze_real, apply_floor, factorize_samples, synthesize, Coeffs, Factorization, Grid,
    SpectralDensity, DEFAULT_FACTOR_TOL,
};

/// Largest relative change of `Δ` accepted when the operator order doubles.
pub const ORDER_TOL: f64 = 1e-6;

/// `(Ad)_k = Σ_l a(k+l) d(l)` for `k = 0..a.len()`.
pub fn ad_coeffs(a: &[C64], d: &[C64]) -> Vec<C64> {
    let n = a.len();
    (0..n)
        .map(|k| (0..(n - k).min(d.len())).map(|l| a[k + l] * d[l]).sum())
        .collect()
}

pub fn predict(f: &SpectralDensity, a: &CoefSeq, grid: &Grid, l: usize) -> Result<EstimatePlan> {
    predict_samples(&f.eval(grid)?, a, l)
}

pub fn predict_samples(f: &[f64], a: &CoefSeq, l: usize) -> Result<EstimatePlan> {
    a.certify()?;
    let fact = factorize_samples(f, l, DEFAULT_FACTOR_TOL)?;
    let mut plan = predict_with_factor(f, &fact, &a.values(), l);
    if fact.clamped > 0 {
        plan.warnings.push(format!("{} density samples clamped at the floor", fact.clamped));
    }
    Ok(plan)
}

/// Noiseless plan from a known factorization of `f`.
pub fn predict_with_factor(f: &[f64], fact: &Factorization, a: &[C64], l: usize) -> EstimatePlan {
    let m = f.len();
    let ad = ad_coeffs(a, &fact.d);
    let delta: f64 = ad.iter().map(|z| z.norm_sqr()).sum();
    let big_a = synthesize(&Coeffs::causal(a.to_vec()), m);
    let r = synthesize(&Coeffs::causal(ad), m);
    let phi = fact.phi_on_grid(m);
    let (fl, _, floor) = apply_floor(f);
    let _ = fl;
    let h: Vec<C64> = (0..m)
        .map(|i| {
            let p = phi[i];
            big_a[i] - r[i] * p.conj() / p.norm_sqr().max(floor)
        })
        .collect();
    let pr = project(Problem::Extrapolation, a.len(), l, &h, a);
    EstimatePlan {
        problem: Problem::Extrapolation,
        n: a.len(),
        a: a.to_vec(),
        h_coeffs: pr.kept,
        delta,
        delta_imag: 0.0,
        support_leakage: pr.leakage,
        discarded_energy: pr.discarded,
        min_eigenvalue: None,
        order_change: None,
        warnings: vec![],
    }
}

/// Rejects `f+g` with samples at or below `1e−12 max(f+g)`.
pub(crate) fn check_minimality(s: &[f64]) -> Result<()> {
    let max = s.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::MinimalityViolated("density vanishes identically".into()));
    }
    if let Some(i) = s.iter().position(|&x| !(x > 1e-12 * max)) {
        return Err(Error::MinimalityViolated(format!(
            "the inverse density is not integrable (sample {i} is {:.3e})",
            s[i]
        )));
    }
    Ok(())
}

/// Fourier coefficients of `1/(f+g)`, `f/(f+g)` and `fg/(f+g)` up to `maxlag`.
pub(crate) struct NoisySymbols {
    pub b: Coeffs,
    pub r: Coeffs,
    pub q: Coeffs,
    pub b_range: (f64, f64),
}

pub(crate) fn noisy_symbols(f: &[f64], g: &[f64], maxlag: usize) -> Result<NoisySymbols> {
    if f.len() != g.len() {
        return Err(Error::input("f and g are sampled on different grids"));
    }
    let s: Vec<f64> = f.iter().zip(g).map(|(a, b)| a + b).collect();
    check_minimality(&s)?;
    let b: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let r: Vec<f64> = f.iter().zip(&s).map(|(a, x)| a / x).collect();
    let q: Vec<f64> = f.iter().zip(g).zip(&s).map(|((a, c), x)| a * c / x).collect();
    let lo = b.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = b.iter().cloned().fold(0.0, f64::max);
    Ok(NoisySymbols {
        b: analyze_real(&b, maxlag),
        r: analyze_real(&r, maxlag),
        q: analyze_real(&q, maxlag),
        b_range: (lo, hi),
    })
}

pub(crate) struct NoisySolution {
    pub c: Vec<C64>,
    pub delta: C64,
    pub min_eigenvalue: f64,
}

/// `c = B⁻¹ R a` and `Δ = ⟨Ra, c⟩ + ⟨Qa, a⟩` at order `a.len()`.
pub(crate) fn noisy_solve(sym: &NoisySymbols, a: &[C64]) -> Result<NoisySolution> {
    let ra = toeplitz_mul(&sym.r, a);
    let qa = toeplitz_mul(&sym.q, a);
    let sol = toeplitz_solve(&sym.b, &ra, sym.b_range)?;
    let inner = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(u, v)| u * v.conj()).sum::<C64>();
    let delta = inner(&ra, &sol.x) + inner(&qa, a);
    Ok(NoisySolution { c: sol.x, delta, min_eigenvalue: sol.min_eigenvalue })
}

/// `h = (A f − C)/(f+g)` on the grid.
pub(crate) fn noisy_characteristic(f: &[f64], g: &[f64], a: &[C64], c: &[C64]) -> Vec<C64> {
    let m = f.len();
    let big_a = synthesize(&Coeffs::causal(a.to_vec()), m);
    let big_c = synthesize(&Coeffs::causal(c.to_vec()), m);
    (0..m)
        .map(|i| (big_a[i] * f[i] - big_c[i]) / (f[i] + g[i]))
        .collect()
}

pub fn predict_noisy(
    f: &SpectralDensity,
    g: &SpectralDensity,
    a: &CoefSeq,
    grid: &Grid,
    l: usize,
) -> Result<EstimatePlan> {
    predict_noisy_samples(&f.eval(grid)?, &g.eval(grid)?, a, l)
}

pub fn predict_noisy_samples(f: &[f64], g: &[f64], a: &CoefSeq, l: usize) -> Result<EstimatePlan> {
    a.certify()?;
    let m = f.len();
    Grid::new(m)?;
    let av = a.values();
    let order = (l + 1).max(av.len());
    if order > m / 2 - 1 {
        return Err(Error::input(format!("operator order {order} too large for a grid of {m} points")));
    }
    let solve_at = |order: usize| -> Result<(NoisySolution, Vec<C64>)> {
        let sym = noisy_symbols(f, g, order)?;
        let mut ap = av.clone();
        ap.resize(order, ZERO);
        Ok((noisy_solve(&sym, &ap)?, ap))
    };
    let (sol, ap) = solve_at(order)?;
    let mut warnings = vec![];
    let doubled = 2 * order;
    let order_change = if doubled <= m / 2 - 1 {
        let (sol2, _) = solve_at(doubled)?;
        let change = (sol2.delta.re - sol.delta.re).abs() / sol2.delta.re.abs().max(f64::MIN_POSITIVE);
        if !(change < ORDER_TOL) {
            return Err(Error::NonConvergence {
                iterations: 2,
                residual: change,
                trace: vec![sol.delta.re, sol2.delta.re],
            });
        }
        Some(change)
    } else {
        warnings.push(format!("order check skipped: order {doubled} exceeds the grid"));
        None
    };
    let h = noisy_characteristic(f, g, &ap, &sol.c);
    let pr = project(Problem::ExtrapolationNoisy, av.len(), l, &h, &av);
    Ok(EstimatePlan {
        problem: Problem::ExtrapolationNoisy,
        n: av.len(),
        a: av,
        h_coeffs: pr.kept,
        delta: sol.delta.re,
        delta_imag: sol.delta.im,
        support_leakage: pr.leakage,
        discarded_energy: pr.discarded,
        min_eigenvalue: Some(sol.min_eigenvalue),
        order_change,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::re;
    use crate::plan::{plan_delta, quadrature_delta};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(1024).unwrap()
    }

    #[test]
    fn white_noise_is_unpredictable() {
        let p = predict(&SpectralDensity::white(1.0), &CoefSeq::from_real(&[1.0]), &grid(), 64).unwrap();
        assert!((p.delta - 1.0).abs() < 1e-12);
        assert!(p.h_coeffs.max_abs() < 1e-12);
    }

    #[test]
    fn ar1_one_step() {
        let p = predict(&SpectralDensity::ar1(0.5), &CoefSeq::from_real(&[1.0]), &grid(), 128).unwrap();
        assert!((p.delta - 1.0).abs() < 1e-12);
        assert!((p.h_coeffs.get(-1) - re(0.5)).norm() < 1e-12);
        assert!(p.h_coeffs.get(-2).norm() < 1e-12);
        assert!(p.support_leakage < 1e-12);
    }

    #[test]
    fn ar1_two_point_functional() {
        let p = predict(&SpectralDensity::ar1(0.5), &CoefSeq::from_real(&[1.0, 1.0]), &grid(), 128).unwrap();
        assert!((p.delta - 3.25).abs() < 1e-12);
        assert!((p.h_coeffs.get(-1) - re(0.75)).norm() < 1e-12);
        let f = SpectralDensity::ar1(0.5).eval(&grid()).unwrap();
        assert!((plan_delta(&p, &f, None) - 3.25).abs() < 1e-10);
    }

    #[test]
    fn noisy_white_examples() {
        let a = CoefSeq::from_real(&[1.0]);
        let p = predict_noisy(&SpectralDensity::white(1.0), &SpectralDensity::white(1.0), &a, &grid(), 32).unwrap();
        assert!((p.delta - 1.0).abs() < 1e-12);
        assert!(p.h_coeffs.max_abs() < 1e-12);
        let p = predict_noisy(&SpectralDensity::white(1.0), &SpectralDensity::white(3.0), &a, &grid(), 32).unwrap();
        assert!((p.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_limit() {
        let a = CoefSeq::from_real(&[1.0]);
        let zero = SpectralDensity::grid(vec![0.0; 1024]).unwrap();
        let p = predict_noisy(&SpectralDensity::ar1(0.5), &zero, &a, &grid(), 128).unwrap();
        assert!((p.delta - 1.0).abs() < 1e-10);
        assert!((p.h_coeffs.get(-1) - re(0.5)).norm() < 1e-10);
    }

    #[test]
    fn zero_noise_and_signal_violates_minimality() {
        let z = SpectralDensity::grid(vec![0.0; 1024]).unwrap();
        let r = predict_noisy(&z, &z, &CoefSeq::from_real(&[1.0]), &grid(), 8);
        assert!(matches!(r, Err(Error::MinimalityViolated(_))));
    }

    fn density(ma: &[(f64, f64)], ar: &[(f64, f64)]) -> SpectralDensity {
        let p = |v: &[(f64, f64)]| -> Vec<C64> {
            let mut c = vec![re(1.0)];
            for &(rad, ang) in v {
                let root = C64::from_polar(rad, ang);
                let mut n = vec![ZERO; c.len() + 1];
                for (i, x) in c.iter().enumerate() {
                    n[i] += x;
                    n[i + 1] -= x / root;
                }
                c = n;
            }
            c
        };
        SpectralDensity::rational(p(ma), p(ar)).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn frequency_and_matrix_errors_agree(
            ma in proptest::collection::vec((1.3f64..3.0, -3.1f64..3.1), 0..3),
            ar in proptest::collection::vec((1.3f64..3.0, -3.1f64..3.1), 0..3),
            a in proptest::collection::vec((-1f64..1.0, -1f64..1.0), 1..4),
            s in 0.5f64..2.0,
        ) {
            let f = density(&ma, &ar);
            let coefs: Vec<C64> = a.iter().map(|&(x, y)| C64::new(x, y)).collect();
            let fs = f.eval(&grid()).unwrap();
            let p = predict_samples(&fs, &CoefSeq::finite(coefs.clone()), 200).unwrap();
            let q = plan_delta(&p, &fs, None);
            prop_assert!((q - p.delta).abs() <= 1e-7 * p.delta);
            prop_assert!(p.support_leakage <= 1e-8);
            // linearity in a
            let ps = predict_samples(&fs, &CoefSeq::finite(coefs.iter().map(|z| z * s).collect()), 200).unwrap();
            prop_assert!((ps.delta - s * s * p.delta).abs() <= 1e-9 * ps.delta);
            // noisy version with a second density
            let g: Vec<f64> = grid().points().iter().map(|l| 0.5 + 0.3 * (l + s).cos()).collect();
            let pn = predict_noisy_samples(&fs, &g, &CoefSeq::finite(coefs.clone()), 200).unwrap();
            let hq = pn.h_on_grid(1024);
            let qn = quadrature_delta(&coefs, &hq, &fs, Some(&g));
            prop_assert!((qn - pn.delta).abs() <= 1e-7 * pn.delta);
            prop_assert!(pn.delta >= p.delta * (1.0 - 1e-9));
        }
    }
}
