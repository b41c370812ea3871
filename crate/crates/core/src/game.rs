//! Two-person estimation game under the power constraint `E|ξ(j)|² ≤ P`.
//!
//! The value is `P ν²` with `ν²` the top eigenvalue of `Q = H H*`, and the
//! least favourable sequence is the moving average whose weights are the
//! matching eigenvector scaled to power `P`.

use crate::coefs::CoefSeq;
use crate::cplx::{C64, ZERO};
use crate::error::{Error, Result};
use crate::operators::{build_game_matrix, top_eigenpair};
use crate::spectra::{Coeffs, Factorization};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    /// Top eigenvalue of the game matrix.
    pub nu2: f64,
    #[serde(with = "crate::cplx::vec")]
    pub phi: Vec<C64>,
    /// Moving-average weights of the least favourable sequence, `conj(φ)`.
    pub least_favourable: Factorization,
    /// Weights `e(u)`, `u = −(n−1)..−1`, of the minimax estimate
    /// `Â = Σ_u e(u) ε(u)` in terms of the innovations.
    pub estimate_weights: Coeffs,
    pub tail_bound: f64,
    pub order: usize,
}

/// Solves the game for `a` at power `p`; `n` overrides the order
/// (zero padding for finite functionals, truncation for infinite ones).
pub fn solve_game(a: &CoefSeq, p: f64, n: Option<usize>) -> Result<GameSolution> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::input(format!("power must be positive, got {p}")));
    }
    a.validate()?;
    let a = match n {
        Some(n) if a.is_finite() => {
            if n < a.order() {
                return Err(Error::input(format!(
                    "order {n} is shorter than the functional ({} coefficients)",
                    a.order()
                )));
            }
            a.clone()
        }
        Some(n) => a.with_truncation(n),
        None => a.clone(),
    };
    let tail_bound = a.certify()?;
    let order = n.unwrap_or(a.order());
    let mut coeffs = a.values();
    coeffs.resize(order, ZERO);
    if coeffs.iter().all(|z| z.norm() == 0.0) {
        return Ok(GameSolution {
            value: 0.0,
            nu2: 0.0,
            phi: vec![],
            least_favourable: Factorization::from_ma(vec![]),
            estimate_weights: Coeffs::new(-1, vec![]),
            tail_bound,
            order,
        });
    }
    let q = build_game_matrix(&coeffs, order);
    let top = top_eigenpair(&q)?;
    let s = p.sqrt();
    let phi: Vec<C64> = top.vector.iter().map(|z| z * s).collect();
    // Q = H H* while the error of a moving average d is ‖H d‖²; H is
    // symmetric, so the maximizing weights are conj(φ).
    let d: Vec<C64> = phi.iter().map(|z| z.conj()).collect();
    let estimate_weights = innovation_weights(&coeffs, &d);
    Ok(GameSolution {
        value: p * top.value,
        nu2: top.value,
        least_favourable: Factorization::from_ma(d),
        phi,
        estimate_weights,
        tail_bound,
        order,
    })
}

/// `e(u) = Σ_j a(j) φ(j−u)` for `u = −(n−1)..−1`.
fn innovation_weights(a: &[C64], phi: &[C64]) -> Coeffs {
    let n = a.len();
    if n < 2 {
        return Coeffs::new(-1, vec![]);
    }
    let lo = -(n as i64 - 1);
    let values = (lo..0)
        .map(|u| {
            (0..n)
                .filter_map(|j| {
                    let k = j as i64 - u;
                    (k < phi.len() as i64).then(|| a[j] * phi[k as usize])
                })
                .sum()
        })
        .collect();
    Coeffs::new(lo, values)
}
