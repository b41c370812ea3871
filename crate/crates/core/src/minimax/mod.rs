//! Least favourable densities and minimax-robust characteristics.
//!
//! For a class `D` of densities the least favourable `f⁰ ∈ D` maximizes the
//! optimal error `Δ(f)`, and the characteristic `h⁰ = h(f⁰)` is minimax when
//! `(h⁰, f⁰)` is a saddle point:
//! `Δ(h, f⁰) ≥ Δ(h⁰, f⁰) ≥ Δ(h⁰, f)` for admissible `h` and `f ∈ D`.
//!
//! The power class for extrapolation is solved through the Hankel
//! eigenproblem and the inverse-power class for interpolation in closed
//! form. The remaining classes use a damped fixed-point iteration on the
//! class formula, with the free scale calibrated by bisection against the
//! class constraint. [`verify_saddle`] audits both inequalities with seeded
//! random probes.

mod classes;
mod closed;
mod fixed;
mod saddle;

pub use classes::DensityClass;
pub use closed::{lf_extrap_d0, lf_interp_d0minus, lf_interp_moments};
pub use fixed::{defining_residual, lf_fixed_point, lf_noisy_pair};
pub use saddle::{verify_saddle, SaddleReport};

use crate::coefs::CoefSeq;
use crate::error::{Error, Result};
use crate::plan::{EstimatePlan, Problem};
use crate::spectra::{DEFAULT_GRID, DEFAULT_TRUNC};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimaxConfig {
    pub grid: usize,
    /// Truncation `L` of the characteristic window and noisy operators.
    pub trunc: usize,
    /// Weight of the new candidate in each density update.
    pub damping: f64,
    /// Stop when the relative sup-norm change falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Sweeps kept for Anderson mixing; zero gives plain damped iteration.
    pub accel: usize,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        MinimaxConfig {
            grid: DEFAULT_GRID,
            trunc: DEFAULT_TRUNC,
            damping: 0.5,
            tol: 1e-8,
            max_iter: 500,
            accel: 5,
        }
    }
}

impl MinimaxConfig {
    fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::input(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::input("tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `sup|f⁰ − T(f⁰)| / max f⁰` for the class map `T`.
    pub fixedpoint: f64,
    /// Largest relative violation of the class constraints.
    pub constraint: f64,
    /// `min_h Δ(h, f⁰) − Δ(h⁰, f⁰)` over the audit probes, relative to `Δ(h⁰, f⁰)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddle_lo: Option<f64>,
    /// `Δ(h⁰, f⁰) − max_f Δ(h⁰, f)` over the audit probes, relative to `Δ(h⁰, f⁰)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saddle_hi: Option<f64>,
}

/// A candidate least favourable density considered by a solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub delta: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSolution {
    pub problem: Problem,
    pub class: DensityClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_class: Option<DensityClass>,
    /// `f⁰` on the grid.
    pub lf_density: Vec<f64>,
    /// `g⁰` on the grid for noisy problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lf_noise: Option<Vec<f64>>,
    pub h0: EstimatePlan,
    /// `Δ(h⁰, f⁰)`.
    pub game_value: f64,
    pub residuals: Residuals,
    #[serde(default)]
    pub candidates: Vec<Candidate>,
    pub iterations: usize,
    /// Relative density change per iteration.
    #[serde(default)]
    pub trace: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl MinimaxSolution {
    /// Copies the audit margins into the residuals.
    pub fn with_audit(mut self, report: &SaddleReport) -> Self {
        self.residuals.saddle_lo = Some(report.saddle_lo);
        self.residuals.saddle_hi = Some(report.saddle_hi);
        self
    }
}

/// Dispatches to the solver for `problem` and the given class(es): a noise
/// class selects the noisy pair solver.
pub fn solve(
    problem: Problem,
    a: &CoefSeq,
    class: &DensityClass,
    noise_class: Option<&DensityClass>,
    cfg: &MinimaxConfig,
) -> Result<MinimaxSolution> {
    match (problem.is_noisy(), noise_class) {
        (true, Some(g)) => lf_noisy_pair(a, class, g, problem, cfg),
        (true, None) => Err(Error::input("a noisy problem needs a noise class")),
        (false, None) => lf_fixed_point(a, class, problem, cfg),
        (false, Some(_)) => Err(Error::input("a noise class was given for a noiseless problem")),
    }
}
