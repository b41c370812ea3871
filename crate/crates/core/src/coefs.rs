//! Coefficients `a(j)`, `j ≥ 0`, of the functional `Aξ = Σ a(j) ξ(j)`.

use crate::cplx::{self, C64, ONE, ZERO};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tail size at which a truncated infinite functional is accepted.
pub const TAIL_TOL: f64 = 1e-10;

fn one() -> C64 {
    ONE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CoefSeq {
    /// `a(0..=N)`.
    Finite {
        #[serde(with = "cplx::vec")]
        coeffs: Vec<C64>,
    },
    /// `a(j) = scale · e^{−decay·j}`, kept for `j < truncation`.
    Geometric {
        #[serde(with = "cplx::one", default = "one")]
        scale: C64,
        decay: f64,
        truncation: usize,
    },
    /// `a(j) = scale · (j+1)^{−exponent}`, kept for `j < truncation`.
    Power {
        #[serde(with = "cplx::one", default = "one")]
        scale: C64,
        exponent: f64,
        truncation: usize,
    },
}

impl CoefSeq {
    pub fn finite(coeffs: Vec<C64>) -> Self {
        CoefSeq::Finite { coeffs }
    }

    pub fn from_real(v: &[f64]) -> Self {
        CoefSeq::finite(v.iter().map(|&x| cplx::re(x)).collect())
    }

    pub fn geometric(decay: f64, truncation: usize) -> Self {
        CoefSeq::Geometric { scale: ONE, decay, truncation }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoefSeq::Finite { coeffs } => {
                if coeffs.is_empty() {
                    return Err(Error::input("coefficient sequence is empty"));
                }
                if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::input("non-finite coefficient"));
                }
            }
            CoefSeq::Geometric { decay, truncation, .. } => {
                if !(*decay > 0.0) || *truncation == 0 {
                    return Err(Error::input("geometric rule needs decay > 0 and truncation >= 1"));
                }
            }
            CoefSeq::Power { exponent, truncation, .. } => {
                if !(*exponent > 1.0) || *truncation == 0 {
                    return Err(Error::input("power rule needs exponent > 1 and truncation >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, CoefSeq::Finite { .. })
    }

    /// `a(j)` without truncation.
    pub fn coeff(&self, j: usize) -> C64 {
        match self {
            CoefSeq::Finite { coeffs } => coeffs.get(j).copied().unwrap_or(ZERO),
            CoefSeq::Geometric { scale, decay, .. } => scale * (-decay * j as f64).exp(),
            CoefSeq::Power { scale, exponent, .. } => scale * ((j + 1) as f64).powf(-exponent),
        }
    }

    /// Number of coefficients in use.
    pub fn order(&self) -> usize {
        match self {
            CoefSeq::Finite { coeffs } => coeffs.len(),
            CoefSeq::Geometric { truncation, .. } | CoefSeq::Power { truncation, .. } => *truncation,
        }
    }

    /// The coefficients in use, `a(0..order)`.
    pub fn values(&self) -> Vec<C64> {
        (0..self.order()).map(|j| self.coeff(j)).collect()
    }

    /// Same rule with a different truncation; finite sequences are unchanged.
    pub fn with_truncation(&self, n: usize) -> Self {
        match self.clone() {
            CoefSeq::Geometric { scale, decay, .. } => CoefSeq::Geometric { scale, decay, truncation: n },
            CoefSeq::Power { scale, exponent, .. } => CoefSeq::Power { scale, exponent, truncation: n },
            f => f,
        }
    }

    /// `Σ_{j≥n} (j+1)|a(j)|²` over the untruncated sequence.
    pub fn tail_bound(&self, n: usize) -> f64 {
        match self {
            CoefSeq::Finite { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(n)
                .map(|(j, z)| (j + 1) as f64 * z.norm_sqr())
                .sum(),
            CoefSeq::Geometric { scale, decay, .. } => {
                let q = (-2.0 * decay).exp();
                let nf = n as f64;
                scale.norm_sqr() * q.powf(nf) * ((nf + 1.0) / (1.0 - q) + q / (1.0 - q).powi(2))
            }
            CoefSeq::Power { scale, exponent, .. } => {
                const TERMS: usize = 1_000_000;
                let e = 1.0 - 2.0 * exponent;
                let partial: f64 = (n..n + TERMS).map(|j| ((j + 1) as f64).powf(e)).sum();
                let end = (n + TERMS) as f64 + 0.5;
                scale.norm_sqr() * (partial + end.powf(e + 1.0) / (-(e + 1.0)))
            }
        }
    }

    /// Total `Σ_j (j+1)|a(j)|²`.
    pub fn weighted_energy(&self) -> f64 {
        self.tail_bound(0)
    }

    /// Checks that the declared truncation captures all but a `TAIL_TOL`
    /// fraction of `Σ (j+1)|a(j)|²`; returns the tail.
    pub fn certify(&self) -> Result<f64> {
        self.validate()?;
        let n = self.order();
        if self.is_finite() {
            return Ok(0.0);
        }
        let total = self.weighted_energy();
        let tail = self.tail_bound(n);
        if tail < TAIL_TOL * total {
            return Ok(tail);
        }
        let mut hi = n.max(1);
        while self.tail_bound(hi) >= TAIL_TOL * total {
            hi *= 2;
            if hi > 1 << 40 {
                break;
            }
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.tail_bound(mid) < TAIL_TOL * total {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::IllPosedFunctional { order: n, tail, required: hi })
    }
}
