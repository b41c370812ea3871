use super::grid::Grid;
use crate::cplx::{self, C64, ONE};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative threshold below which `|Q(e^{−iλ})|` counts as a unit-circle root.
const AR_ROOT_TOL: f64 = 1e-8;

fn default_ar() -> Vec<C64> {
    vec![ONE]
}

/// Nonnegative 2π-periodic spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SpectralDensity {
    /// `|P(e^{−iλ})|² / |Q(e^{−iλ})|²` with `P(z) = Σ ma_k z^k`, `Q(z) = Σ ar_k z^k`, `ar_0 = 1`.
    Rational {
        #[serde(with = "cplx::vec")]
        ma: Vec<C64>,
        #[serde(with = "cplx::vec", default = "default_ar")]
        ar: Vec<C64>,
    },
    /// Samples at `λ_m = −π + 2πm/M`.
    Grid { values: Vec<f64> },
}

impl SpectralDensity {
    pub fn rational(ma: Vec<C64>, ar: Vec<C64>) -> Result<Self> {
        let d = SpectralDensity::Rational { ma, ar };
        d.validate()?;
        Ok(d)
    }

    pub fn from_real(ma: &[f64], ar: &[f64]) -> Result<Self> {
        Self::rational(
            ma.iter().map(|&x| cplx::re(x)).collect(),
            ar.iter().map(|&x| cplx::re(x)).collect(),
        )
    }

    /// Constant density `c`.
    pub fn white(c: f64) -> Self {
        SpectralDensity::Rational {
            ma: vec![cplx::re(c.sqrt())],
            ar: vec![ONE],
        }
    }

    /// `1/|1 − ρe^{−iλ}|²`.
    pub fn ar1(rho: f64) -> Self {
        SpectralDensity::Rational {
            ma: vec![ONE],
            ar: vec![ONE, cplx::re(-rho)],
        }
    }

    pub fn grid(values: Vec<f64>) -> Result<Self> {
        let d = SpectralDensity::Grid { values };
        d.validate()?;
        Ok(d)
    }

    /// Structural checks that do not need a grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::Rational { ma, ar } => {
                if ma.is_empty() {
                    return Err(Error::input("rational density needs at least one MA coefficient"));
                }
                if ar.is_empty() || (ar[0] - ONE).norm() > 1e-12 {
                    return Err(Error::input("AR polynomial must have leading coefficient 1"));
                }
                if ma.iter().chain(ar).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::input("non-finite polynomial coefficient"));
                }
                Ok(())
            }
            SpectralDensity::Grid { values } => {
                Grid::new(values.len())?;
                if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(Error::input(format!("grid density value {x} is not a finite nonnegative number")));
                }
                Ok(())
            }
        }
    }

    /// Grid size a tabulated density is bound to.
    pub fn native_grid(&self) -> Option<Grid> {
        match self {
            SpectralDensity::Grid { values } => Grid::new(values.len()).ok(),
            _ => None,
        }
    }

    /// Samples `f(λ_m)` on `grid`.
    pub fn eval(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            SpectralDensity::Rational { ma, ar } => {
                let qscale: f64 = ar.iter().map(|z| z.norm()).sum();
                let mut out = Vec::with_capacity(grid.size());
                let mut min_q = f64::INFINITY;
                for m in 0..grid.size() {
                    let z = C64::from_polar(1.0, -grid.lambda(m));
                    let p = horner(ma, z);
                    let q = horner(ar, z);
                    min_q = min_q.min(q.norm() / qscale);
                    out.push(p.norm_sqr() / q.norm_sqr());
                }
                if min_q <= AR_ROOT_TOL {
                    return Err(Error::DegenerateDensity(format!(
                        "AR polynomial vanishes on the unit circle (min |Q| = {min_q:.3e})"
                    )));
                }
                Ok(out)
            }
            SpectralDensity::Grid { values } => {
                if values.len() != grid.size() {
                    return Err(Error::input(format!(
                        "grid density has {} samples but the grid has {}",
                        values.len(),
                        grid.size()
                    )));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Free function form of [`SpectralDensity::eval`].
pub fn eval_density(density: &SpectralDensity, grid: &Grid) -> Result<Vec<f64>> {
    density.eval(grid)
}

fn horner(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &x| acc * z + x)
}
