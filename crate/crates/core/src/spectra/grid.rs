use crate::error::{Error, Result};
use std::f64::consts::PI;

pub const DEFAULT_GRID: usize = 4096;
pub const DEFAULT_TRUNC: usize = 512;

/// Uniform grid `λ_m = −π + 2πm/M` on `[−π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    size: usize,
}

impl Grid {
    /// `size` must be a power of two no smaller than 64.
    pub fn new(size: usize) -> Result<Self> {
        if size < 64 || !size.is_power_of_two() {
            return Err(Error::input(format!(
                "grid size must be a power of two >= 64, got {size}"
            )));
        }
        Ok(Grid { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn lambda(&self, m: usize) -> f64 {
        -PI + 2.0 * PI * m as f64 / self.size as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|m| self.lambda(m)).collect()
    }

    /// Largest lag whose Fourier coefficient is not aliased.
    pub fn max_lag(&self) -> usize {
        self.size / 2 - 1
    }

    /// Grid implied by a sample vector.
    pub fn of_samples(samples: &[f64]) -> Result<Self> {
        Grid::new(samples.len())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid { size: DEFAULT_GRID }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_sizes() {
        assert!(Grid::new(32).is_err());
        assert!(Grid::new(100).is_err());
        assert!(Grid::new(64).is_ok());
    }

    #[test]
    fn points_start_at_minus_pi() {
        let g = Grid::new(64).unwrap();
        assert_eq!(g.lambda(0), -PI);
        assert!((g.lambda(32)).abs() < 1e-15);
        assert_eq!(g.points().len(), 64);
    }
}
