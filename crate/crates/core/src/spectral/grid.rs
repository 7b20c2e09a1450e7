use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform periodic grid on the torus `[-L, L)` with `N` points, `N` a power
/// of two. Wavenumbers are `ξ_j = π j / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    len: usize,
}

impl Grid {
    pub const DEFAULT_HALF_LENGTH: f64 = 16.0 * PI;

    pub fn new(half_length: f64, len: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(invalid(format!(
                "half-length must be positive and finite, got {half_length}"
            )));
        }
        if len < 8 || !len.is_power_of_two() {
            return Err(invalid(format!(
                "grid size must be a power of two >= 8, got {len}"
            )));
        }
        Ok(Self { half_length, len })
    }

    /// Grid on the default torus `[-16π, 16π)`.
    pub fn with_len(len: usize) -> Result<Self> {
        Self::new(Self::DEFAULT_HALF_LENGTH, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn period(&self) -> f64 {
        2.0 * self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.period() / self.len as f64
    }

    pub fn point(&self, m: usize) -> f64 {
        -self.half_length + m as f64 * self.spacing()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|m| self.point(m))
    }

    /// Number of stored half-spectrum bins, `N/2 + 1`.
    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Wavenumber of half-spectrum bin `j`; bin `N/2` is the Nyquist mode.
    pub fn wavenumber(&self, j: usize) -> f64 {
        PI * j as f64 / self.half_length
    }

    pub fn nyquist(&self) -> f64 {
        self.wavenumber(self.len / 2)
    }

    /// Fundamental wavenumber `π / L`.
    pub fn fundamental(&self) -> f64 {
        PI / self.half_length
    }

    /// All resolved wavenumbers in increasing order, `-N/2 .. N/2 - 1`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let half = (self.len / 2) as i64;
        (-half..half)
            .map(|j| PI * j as f64 / self.half_length)
            .collect()
    }

    /// Bin index of wavenumber `xi`, if it lies on the grid.
    pub fn bin_of(&self, xi: f64) -> Option<usize> {
        let j = xi.abs() * self.half_length / PI;
        let r = j.round();
        ((j - r).abs() < 1e-9 && r <= (self.len / 2) as f64).then_some(r as usize)
    }

    /// Multiplicity of bin `j` in the full Hermitian spectrum.
    pub(crate) fn multiplicity(&self, j: usize) -> f64 {
        if j == 0 || j == self.len / 2 {
            1.0
        } else {
            2.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grid_wavenumbers() {
        let g = Grid::new(PI, 8).unwrap();
        let k: Vec<f64> = g.wavenumbers();
        assert_eq!(k, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.spacing() * 8.0, 2.0 * PI);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(PI, 12).is_err());
        assert!(Grid::new(PI, 4).is_err());
        assert!(Grid::new(-1.0, 16).is_err());
        assert!(Grid::new(f64::NAN, 16).is_err());
    }

    #[test]
    fn spacing_times_len_is_period_exactly() {
        for p in 3..14 {
            let g = Grid::with_len(1 << p).unwrap();
            assert_eq!(g.spacing() * g.len() as f64, g.period());
        }
    }
}
