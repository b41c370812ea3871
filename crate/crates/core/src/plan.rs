//! Estimate plans: the Fourier coefficients of a spectral characteristic
//! together with its admissible support and mean-square error.

use crate::cplx::{C64, ZERO};
use crate::spectra::{analyze, synthesize, Coeffs};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Extrapolation,
    ExtrapolationNoisy,
    Interpolation,
    InterpolationNoisy,
}

impl Problem {
    pub fn is_noisy(self) -> bool {
        matches!(self, Problem::ExtrapolationNoisy | Problem::InterpolationNoisy)
    }

    pub fn is_interpolation(self) -> bool {
        matches!(self, Problem::Interpolation | Problem::InterpolationNoisy)
    }

    /// Whether `ĥ(j)` may be nonzero: past indices for extrapolation,
    /// indices outside `0..n` for interpolation of `n` values.
    pub fn admissible(self, n: usize, j: i64) -> bool {
        if self.is_interpolation() {
            j < 0 || j >= n as i64
        } else {
            j < 0
        }
    }
}

/// Spectral characteristic `h(e^{iλ}) = Σ ĥ(j) e^{ijλ}` of a linear estimate
/// `Â = Σ ĥ(j) ζ(j)` of `Σ_{j<n} a(j) ξ(j)` from observations `ζ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatePlan {
    pub problem: Problem,
    /// Number of functional coefficients in use.
    pub n: usize,
    #[serde(with = "crate::cplx::vec")]
    pub a: Vec<C64>,
    /// Coefficients on the admissible support inside the kept window.
    pub h_coeffs: Coeffs,
    pub delta: f64,
    /// Imaginary part left over by the inner-product error formula.
    pub delta_imag: f64,
    /// Largest non-admissible `|ĥ(j)|` before projection, relative to
    /// `max(max|ĥ|, max|a|)`.
    pub support_leakage: f64,
    /// Energy removed by projection and by truncating to the window.
    pub discarded_energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    /// Relative change of `Δ` when the operator order is doubled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_change: Option<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EstimatePlan {
    pub fn admissible(&self, j: i64) -> bool {
        self.problem.admissible(self.n, j)
    }

    /// `h(e^{iλ_m})` from the kept coefficients.
    pub fn h_on_grid(&self, m: usize) -> Vec<C64> {
        synthesize(&self.h_coeffs, m)
    }
}

/// Kept index window: `−l..−1` for extrapolation, `−l..n−1+l` for interpolation.
pub fn window(problem: Problem, n: usize, l: usize) -> (i64, i64) {
    let lo = -(l as i64);
    if problem.is_interpolation() {
        (lo, n as i64 - 1 + l as i64)
    } else {
        (lo, -1)
    }
}

pub struct Projection {
    pub kept: Coeffs,
    pub leakage: f64,
    pub discarded: f64,
}

/// Expands grid values of `h`, measures the non-admissible part and keeps
/// the admissible coefficients in the window.
pub fn project(problem: Problem, n: usize, l: usize, h_grid: &[C64], a: &[C64]) -> Projection {
    let m = h_grid.len();
    let half = (m / 2) as i64;
    let raw = analyze(h_grid, -half + 1, half - 1);
    let scale = raw
        .max_abs()
        .max(a.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .max(f64::MIN_POSITIVE);
    let (lo, hi) = window(problem, n, l);
    let mut leak: f64 = 0.0;
    let mut discarded = 0.0;
    let mut kept = vec![ZERO; (hi - lo + 1) as usize];
    for (j, v) in raw.iter() {
        let ok = problem.admissible(n, j);
        if !ok && j >= lo && j <= n as i64 - 1 + l as i64 {
            leak = leak.max(v.norm());
        }
        if ok && j >= lo && j <= hi {
            kept[(j - lo) as usize] = v;
        } else {
            discarded += v.norm_sqr();
        }
    }
    Projection {
        kept: Coeffs::new(lo, kept),
        leakage: leak / scale,
        discarded,
    }
}

/// Grid quadrature of `(1/2π)∫ |A−h|² f dλ (+ (1/2π)∫ |h|² g dλ)`.
pub fn quadrature_delta(a: &[C64], h_grid: &[C64], f: &[f64], g: Option<&[f64]>) -> f64 {
    let m = f.len();
    let big_a = synthesize(&Coeffs::causal(a.to_vec()), m);
    let mut s = 0.0;
    for i in 0..m {
        s += (big_a[i] - h_grid[i]).norm_sqr() * f[i];
        if let Some(g) = g {
            s += h_grid[i].norm_sqr() * g[i];
        }
    }
    s / m as f64
}

/// Error of the plan's characteristic under densities `f` (and `g`).
pub fn plan_delta(plan: &EstimatePlan, f: &[f64], g: Option<&[f64]>) -> f64 {
    let h = plan.h_on_grid(f.len());
    quadrature_delta(&plan.a, &h, f, g)
}
