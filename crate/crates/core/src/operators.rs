//! Hankel, game and Toeplitz matrices and the Hermitian solvers behind them.

use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use crate::spectra::Coeffs;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Largest order handled by a full eigendecomposition.
pub const DENSE_EIGEN_MAX: usize = 1024;
const POWER_ITER_CAP: usize = 200_000;
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    m: DMatrix<C64>,
}

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::input("matrix is not square"));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for j in 0..m.nrows() {
            for k in j..m.ncols() {
                if (m[(j, k)] - m[(k, j)].conj()).norm() > HERMITIAN_TOL * scale {
                    return Err(Error::input(format!("matrix is not Hermitian at ({j}, {k})")));
                }
            }
        }
        Ok(HermitianMatrix { m })
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, j: usize, k: usize) -> C64 {
        self.m[(j, k)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (&self.m * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `H(p, q) = a(p+q)` for `p+q ≤ n−1`, zero below the anti-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    pub n: usize,
    pub a: Vec<C64>,
}

impl HankelMatrix {
    pub fn new(a: &[C64], n: usize) -> Self {
        let mut a = a.to_vec();
        a.resize(n, ZERO);
        a.truncate(n);
        HankelMatrix { n, a }
    }

    pub fn entry(&self, p: usize, q: usize) -> C64 {
        if p + q < self.n {
            self.a[p + q]
        } else {
            ZERO
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |p, q| self.entry(p, q))
    }

    /// `(Hd)_k = Σ_l a(k+l) d(l)`.
    pub fn apply(&self, d: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|k| {
                (0..self.n - k)
                    .filter(|&l| l < d.len())
                    .map(|l| self.a[k + l] * d[l])
                    .sum()
            })
            .collect()
    }
}

/// `Q(p, q) = Σ_{u=0}^{min(n−1−p, n−1−q)} a(p+u) conj(a(q+u))`, i.e. `H H*`.
pub fn build_game_matrix(a: &[C64], n: usize) -> HermitianMatrix {
    let mut a = a.to_vec();
    a.resize(n.max(a.len()), ZERO);
    let mut q = DMatrix::from_element(n, n, ZERO);
    // Q(p, q) = Q(p+1, q+1) + a(p) conj(a(q)), filled from the bottom-right corner.
    for p in (0..n).rev() {
        for c in (0..n).rev() {
            let next = if p + 1 < n && c + 1 < n { q[(p + 1, c + 1)] } else { ZERO };
            q[(p, c)] = next + a[p] * a[c].conj();
        }
    }
    HermitianMatrix { m: q }
}

/// `T(j, k) = r_{j−k}`; requires `r_{−k} = conj(r_k)`.
pub fn build_toeplitz(r: &Coeffs, n: usize) -> Result<HermitianMatrix> {
    let scale = r.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n as i64 {
        if (r.get(-k) - r.get(k).conj()).norm() > HERMITIAN_TOL * scale {
            return Err(Error::input(format!("coefficients are not conjugate symmetric at lag {k}")));
        }
    }
    Ok(HermitianMatrix {
        m: DMatrix::from_fn(n, n, |j, k| r.get(j as i64 - k as i64)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub residual: f64,
}

/// Rotate so the first nonzero component is real and positive.
fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12 * max).copied() {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
        let first = v.iter_mut().find(|z| z.norm() > 1e-12 * max).unwrap();
        *first = C64::new(first.norm(), 0.0);
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Largest eigenvalue and a unit eigenvector, phase fixed so that the first
/// nonzero component is real positive.
pub fn top_eigenpair(m: &HermitianMatrix) -> Result<EigenPair> {
    let n = m.order();
    if n == 0 {
        return Err(Error::input("empty matrix"));
    }
    let norm = m.frobenius();
    let mut v = if n <= DENSE_EIGEN_MAX { dense_top(m) } else { power_top(m, norm)? };
    fix_phase(&mut v);
    let mv = m.mul_vec(&v);
    let value = mv.iter().zip(&v).map(|(a, b)| a * b.conj()).sum::<C64>().re;
    let residual = mv
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b * value).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if residual > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::EigenFailure { residual });
    }
    Ok(EigenPair { value, vector: v, residual })
}

fn dense_top(m: &HermitianMatrix) -> Vec<C64> {
    let n = m.order();
    let eig = SymmetricEigen::new(m.m.clone());
    let vals = &eig.eigenvalues;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-12 * vals.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let top: Vec<usize> = (0..n).filter(|&i| vals[i] >= max - tol).collect();
    if top.len() == 1 {
        return eig.eigenvectors.column(top[0]).iter().cloned().collect();
    }
    // Degenerate top eigenspace: project the first coordinate vector with a
    // nonzero shadow so the choice does not depend on the LAPACK-style order.
    for e in 0..n {
        let mut v = vec![ZERO; n];
        for &i in &top {
            let col = eig.eigenvectors.column(i);
            let w = col[e].conj();
            for (x, c) in v.iter_mut().zip(col.iter()) {
                *x += c * w;
            }
        }
        if normalize(&mut v) > 1e-8 {
            return v;
        }
    }
    eig.eigenvectors.column(top[0]).iter().cloned().collect()
}

fn power_top(m: &HermitianMatrix, norm: f64) -> Result<Vec<C64>> {
    // Unshifted first; if the dominant eigenvalue is negative, shift by its
    // magnitude so the largest algebraic eigenvalue dominates.
    let (v, value) = power_run(m, norm, 0.0)?;
    if value >= 0.0 {
        return Ok(v);
    }
    Ok(power_run(m, norm, -value)?.0)
}

fn power_run(m: &HermitianMatrix, norm: f64, shift: f64) -> Result<(Vec<C64>, f64)> {
    let n = m.order();
    let mut v = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let mut residual = f64::INFINITY;
    for _ in 0..POWER_ITER_CAP {
        let mv = m.mul_vec(&v);
        let value = mv.iter().zip(&v).map(|(a, b)| a * b.conj()).sum::<C64>().re;
        residual = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-11 * norm {
            return Ok((v, value));
        }
        let mut w: Vec<C64> = mv.iter().zip(&v).map(|(a, b)| a + b * shift).collect();
        normalize(&mut w);
        v = w;
    }
    Err(Error::EigenFailure { residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HpdSolution {
    pub x: Vec<C64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub condition: f64,
    pub residual: f64,
}

fn extreme_eigenvalues(m: &HermitianMatrix, chol: &Cholesky<C64, nalgebra::Dyn>) -> (f64, f64) {
    let n = m.order();
    if n <= 64 {
        let vals = SymmetricEigen::new(m.m.clone()).eigenvalues;
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return (lo, hi);
    }
    let start: Vec<C64> = (0..n).map(|i| C64::new(1.0 + (i % 7) as f64 * 0.1, 0.0)).collect();
    let mut v = start.clone();
    normalize(&mut v);
    let mut hi = 0.0;
    for _ in 0..100 {
        let mut w = m.mul_vec(&v);
        hi = normalize(&mut w);
        v = w;
    }
    let mut v = start;
    normalize(&mut v);
    let mut inv = 0.0;
    for _ in 0..100 {
        let mut w = chol.solve(&DVector::from_column_slice(&v)).as_slice().to_vec();
        inv = normalize(&mut w);
        v = w;
    }
    (1.0 / inv, hi)
}

/// Solves `m x = rhs` for Hermitian positive definite `m`, refusing when the
/// smallest eigenvalue is below `1e−12` of the largest.
pub fn solve_hpd(m: &HermitianMatrix, rhs: &[C64]) -> Result<HpdSolution> {
    let n = m.order();
    if rhs.len() != n {
        return Err(Error::input(format!("rhs has length {} for order {n}", rhs.len())));
    }
    let chol = Cholesky::new(m.m.clone()).ok_or(Error::Conditioning { condition: f64::INFINITY })?;
    let (lo, hi) = extreme_eigenvalues(m, &chol);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(lo > 1e-12 * hi) {
        return Err(Error::Conditioning { condition });
    }
    let b = DVector::from_column_slice(rhs);
    let bnorm = b.norm();
    let mut x = chol.solve(&b);
    let mut residual = (&m.m * &x - &b).norm();
    for _ in 0..3 {
        if residual <= 1e-10 * bnorm {
            break;
        }
        let r = &b - &m.m * &x;
        x += chol.solve(&r);
        residual = (&m.m * &x - &b).norm();
    }
    if residual > 1e-10 * bnorm {
        return Err(Error::Conditioning { condition });
    }
    Ok(HpdSolution {
        x: x.as_slice().to_vec(),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        condition,
        residual: if bnorm > 0.0 { residual / bnorm } else { 0.0 },
    })
}

/// Levinson recursion for `T x = rhs` with `T(j, k) = r_{j−k}`, order `rhs.len()`.
pub fn levinson_solve(r: &Coeffs, rhs: &[C64]) -> Result<Vec<C64>> {
    let n = rhs.len();
    if n == 0 {
        return Ok(vec![]);
    }
    let t0 = r.get(0);
    if t0.norm() == 0.0 {
        return Err(Error::Conditioning { condition: f64::INFINITY });
    }
    let mut f = vec![t0.inv()];
    let mut b = vec![t0.inv()];
    let mut x = vec![rhs[0] / t0];
    for k in 1..n {
        let ef: C64 = (0..k).map(|i| r.get((k - i) as i64) * f[i]).sum();
        let eb: C64 = (0..k).map(|i| r.get(-(i as i64 + 1)) * b[i]).sum();
        let den = C64::new(1.0, 0.0) - ef * eb;
        if den.norm() < 1e-14 {
            return Err(Error::Conditioning { condition: f64::INFINITY });
        }
        let mut nf = vec![ZERO; k + 1];
        let mut nb = vec![ZERO; k + 1];
        for i in 0..=k {
            let fi = if i < k { f[i] } else { ZERO };
            let bi = if i > 0 { b[i - 1] } else { ZERO };
            nf[i] = (fi - ef * bi) / den;
            nb[i] = (bi - eb * fi) / den;
        }
        let ex: C64 = (0..k).map(|i| r.get((k - i) as i64) * x[i]).sum();
        x.push(ZERO);
        let s = rhs[k] - ex;
        for i in 0..=k {
            x[i] += s * nb[i];
        }
        f = nf;
        b = nb;
    }
    Ok(x)
}

/// `(T x)_j = Σ_k r_{j−k} x_k` without forming `T`.
pub fn toeplitz_mul(r: &Coeffs, x: &[C64]) -> Vec<C64> {
    let n = x.len() as i64;
    (0..n)
        .map(|j| (0..n).map(|k| r.get(j - k) * x[k as usize]).sum())
        .collect()
}

/// Hermitian Toeplitz solve with the symbol range `[lo, hi]` as the
/// conditioning certificate: eigenvalues of every finite section lie in it.
/// Levinson is tried first and accepted when its residual is below
/// `1e−10 ‖rhs‖`; otherwise the Cholesky path decides.
pub fn toeplitz_solve(r: &Coeffs, rhs: &[C64], symbol_range: (f64, f64)) -> Result<HpdSolution> {
    let (lo, hi) = symbol_range;
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(lo > 1e-12 * hi) {
        return Err(Error::Conditioning { condition });
    }
    let bnorm = rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if let Ok(x) = levinson_solve(r, rhs) {
        let back = toeplitz_mul(r, &x);
        let res = back.iter().zip(rhs).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        if res <= 1e-10 * bnorm {
            return Ok(HpdSolution {
                x,
                min_eigenvalue: lo,
                max_eigenvalue: hi,
                condition,
                residual: if bnorm > 0.0 { res / bnorm } else { 0.0 },
            });
        }
    }
    solve_hpd(&build_toeplitz(r, rhs.len())?, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cplx::re;
    use proptest::prelude::*;

    fn reals(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| re(x)).collect()
    }

    #[test]
    fn game_matrix_small() {
        let q = build_game_matrix(&reals(&[1.0, 1.0]), 2);
        assert_eq!(q.entry(0, 0), re(2.0));
        assert_eq!(q.entry(0, 1), re(1.0));
        assert_eq!(q.entry(1, 1), re(1.0));
        let e = build_game_matrix(&reals(&[1.0]), 4);
        for j in 0..4 {
            for k in 0..4 {
                let want = if j == 0 && k == 0 { 1.0 } else { 0.0 };
                assert_eq!(e.entry(j, k), re(want));
            }
        }
    }

    #[test]
    fn game_matrix_geometric() {
        let a: Vec<C64> = (0..50).map(|j| re((-(j as f64)).exp())).collect();
        let q = build_game_matrix(&a, 50);
        let c = 1.0 / (1.0 - (-2.0f64).exp());
        for (p, s) in [(0, 0), (1, 3), (5, 2)] {
            let want = (-((p + s) as f64)).exp() * c;
            assert!((q.entry(p, s).re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn two_by_two_eigenpair() {
        let q = build_game_matrix(&reals(&[1.0, 1.0]), 2);
        let e = top_eigenpair(&q).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e.value - (3.0 + s5) / 2.0).abs() < 1e-12);
        assert!((e.vector[0].re - ((5.0 + s5) / 10.0).sqrt()).abs() < 1e-12);
        assert!((e.vector[1].re - ((5.0 - s5) / 10.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_picks_first_basis_vector() {
        let m = HermitianMatrix::new(DMatrix::identity(5, 5)).unwrap();
        let e = top_eigenpair(&m).unwrap();
        assert!((e.value - 1.0).abs() < 1e-14);
        assert!((e.vector[0] - re(1.0)).norm() < 1e-12);
        assert!(e.vector[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let a: Vec<C64> = (0..1100).map(|j| C64::new((-(j as f64) / 3.0).exp(), 0.1 * (-(j as f64)).exp())).collect();
        let big = top_eigenpair(&build_game_matrix(&a, 1100)).unwrap();
        let small = top_eigenpair(&build_game_matrix(&a, 200)).unwrap();
        assert!((big.value - small.value).abs() < 1e-9 * small.value);
        for i in 0..20 {
            assert!((big.vector[i] - small.vector[i]).norm() < 1e-6);
        }
    }

    #[test]
    fn solve_examples() {
        let r = Coeffs::new(-1, reals(&[-0.5, 1.25, -0.5]));
        let t = build_toeplitz(&r, 2).unwrap();
        let s = solve_hpd(&t, &reals(&[1.0, 0.0])).unwrap();
        assert!((s.x[0].re - 20.0 / 21.0).abs() < 1e-14);
        assert!((s.x[1].re - 8.0 / 21.0).abs() < 1e-14);
        let tri = build_toeplitz(&r, 3).unwrap();
        assert_eq!(tri.entry(0, 2), ZERO);
        assert_eq!(tri.entry(1, 0), re(-0.5));
    }

    #[test]
    fn two_by_two_closed_form_with_complex_beta() {
        let (alpha, beta) = (2.0, C64::new(0.3, -0.7));
        let r = Coeffs::new(-1, vec![beta.conj(), re(alpha), beta]);
        // entry(0,1) = r_{-1} = conj(beta) here; write the system as [[α, β'], [β̄', α]]
        let t = build_toeplitz(&r, 2).unwrap();
        let bp = t.entry(0, 1);
        let (a, b) = (C64::new(1.0, 0.5), C64::new(-0.2, 0.9));
        let s = solve_hpd(&t, &[a, b]).unwrap();
        let den = alpha * alpha - bp.norm_sqr();
        let c0 = (a * alpha - b * bp) / den;
        let c1 = (b * alpha - a * bp.conj()) / den;
        assert!((s.x[0] - c0).norm() < 1e-14);
        assert!((s.x[1] - c1).norm() < 1e-14);
    }

    #[test]
    fn indefinite_is_refused() {
        let r = Coeffs::new(-1, reals(&[2.0, 1.0, 2.0]));
        let t = build_toeplitz(&r, 2).unwrap();
        assert!(matches!(solve_hpd(&t, &reals(&[1.0, 1.0])), Err(Error::Conditioning { .. })));
    }

    #[test]
    fn non_hermitian_rejected() {
        let r = Coeffs::new(-1, vec![re(0.5), re(1.0), C64::new(0.5, 0.1)]);
        assert!(build_toeplitz(&r, 2).is_err());
    }

    fn random_symbol(coefs: &[(f64, f64)]) -> Coeffs {
        // r from a positive symbol 2 + Σ small cosines/sines keeps T positive definite.
        let l = coefs.len() as i64;
        let mut v = vec![ZERO; 2 * coefs.len() + 1];
        v[coefs.len()] = re(2.0 + coefs.iter().map(|(a, b)| a.abs() + b.abs()).sum::<f64>());
        for (k, &(a, b)) in coefs.iter().enumerate() {
            let z = C64::new(a, b) / 2.0;
            v[coefs.len() + k + 1] = z;
            v[coefs.len() - k - 1] = z.conj();
        }
        Coeffs::new(-l, v)
    }

    proptest! {
        #[test]
        fn game_matrix_is_hankel_gram(re_: Vec<f64>, im_: Vec<f64>) {
            let n = re_.len().min(im_.len()).min(12);
            prop_assume!(n > 0);
            let a: Vec<C64> = (0..n).map(|i| C64::new(re_[i] % 10.0, im_[i] % 10.0)).collect();
            prop_assume!(a.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
            let h = HankelMatrix::new(&a, n).to_dense();
            let hh = &h * h.adjoint();
            let q = build_game_matrix(&a, n);
            let scale = hh.iter().map(|z| z.norm()).fold(1.0, f64::max);
            for j in 0..n { for k in 0..n {
                prop_assert!((hh[(j, k)] - q.entry(j, k)).norm() <= 1e-12 * scale);
            }}
            let top = top_eigenpair(&q).unwrap();
            let sv = h.singular_values()[0];
            prop_assert!((top.value - sv * sv).abs() <= 1e-10 * scale);
        }

        #[test]
        fn levinson_matches_cholesky(
            sym in proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 1..8),
            rhs in proptest::collection::vec((-1f64..1.0, -1f64..1.0), 1..40),
        ) {
            let r = random_symbol(&sym);
            let b: Vec<C64> = rhs.iter().map(|&(x, y)| C64::new(x, y)).collect();
            let t = build_toeplitz(&r, b.len()).unwrap();
            let s = solve_hpd(&t, &b).unwrap();
            let lv = levinson_solve(&r, &b).unwrap();
            for (a, c) in s.x.iter().zip(&lv) {
                prop_assert!((a - c).norm() <= 1e-9 * (1.0 + a.norm()));
            }
            let back = t.mul_vec(&s.x);
            let bn = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let rn = back.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(rn <= 1e-10 * bn.max(1e-300));
        }

        #[test]
        fn game_value_grows_with_order(decay in 0.2f64..2.0) {
            let a: Vec<C64> = (0..40).map(|j| re((-decay * j as f64).exp())).collect();
            let mut last = 0.0;
            for n in [2, 5, 10, 20, 40] {
                let v = top_eigenpair(&build_game_matrix(&a, n)).unwrap().value;
                prop_assert!(v >= last - 1e-12);
                last = v;
            }
        }
    }
}
