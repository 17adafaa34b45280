use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::SpatialGrid;
use super::wave::TIME_TOLERANCE;
use crate::error::{Error, Result};

pub const MAX_PARTICLES: usize = 3;
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

/// Wavefunction on the `n`-fold product grid, `n <= 3`.
///
/// Values are row-major: for two particles `values[j * N + k]` is
/// `psi(x_j, x'_k)`; the first coordinate varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigField {
    grid: SpatialGrid,
    particles: usize,
    values: Vec<Complex64>,
    time: f64,
    symmetry: Symmetry,
}

pub type TwoParticleField = ConfigField;

impl ConfigField {
    /// Validates shape, finiteness, and the declared exchange symmetry.
    pub fn new(
        grid: SpatialGrid,
        particles: usize,
        values: Vec<Complex64>,
        time: f64,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if particles == 0 || particles > MAX_PARTICLES {
            return Err(Error::Unsupported(format!(
                "{particles} particles (supported: 1..={MAX_PARTICLES})"
            )));
        }
        let expected = grid.n_points().pow(particles as u32);
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("configuration-space values"));
        }
        let field = Self {
            grid,
            particles,
            values,
            time,
            symmetry,
        };
        let violation = field.symmetry_violation();
        if violation > SYMMETRY_TOLERANCE {
            return Err(Error::SymmetryModeMismatch(format!(
                "declared {symmetry:?} but exchange violation is {violation:e}"
            )));
        }
        Ok(field)
    }

    pub(crate) fn from_parts_unchecked(
        grid: SpatialGrid,
        particles: usize,
        values: Vec<Complex64>,
        time: f64,
        symmetry: Symmetry,
    ) -> Self {
        Self {
            grid,
            particles,
            values,
            time,
            symmetry,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>, time: f64) -> Self {
        Self::from_parts_unchecked(self.grid, self.particles, values, time, self.symmetry)
    }

    /// `sum |psi|^2 dx^n`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.volume_element()
    }

    pub fn volume_element(&self) -> f64 {
        self.grid.dx().powi(self.particles as i32)
    }

    pub fn check_compatible(&self, other: &ConfigField) -> Result<()> {
        if self.grid != other.grid || self.particles != other.particles {
            return Err(Error::GridMismatch);
        }
        if (self.time - other.time).abs() > TIME_TOLERANCE {
            return Err(Error::TimeMismatch {
                left: self.time,
                right: other.time,
            });
        }
        Ok(())
    }

    /// Largest deviation from the declared exchange symmetry over all
    /// adjacent transpositions.
    pub fn symmetry_violation(&self) -> f64 {
        let sign = match self.symmetry {
            Symmetry::None => return 0.0,
            Symmetry::Symmetric => 1.0,
            Symmetry::Antisymmetric => -1.0,
        };
        let n = self.grid.n_points();
        let mut worst = 0.0f64;
        for swap in 0..self.particles.saturating_sub(1) {
            for (idx, v) in self.values.iter().enumerate() {
                let mut coords = unravel(idx, n, self.particles);
                coords.swap(swap, swap + 1);
                let partner = ravel(&coords, n);
                worst = worst.max((v - self.values[partner] * sign).norm());
            }
        }
        worst
    }
}

pub(crate) fn unravel(mut idx: usize, n: usize, particles: usize) -> Vec<usize> {
    let mut out = vec![0; particles];
    for slot in out.iter_mut().rev() {
        *slot = idx % n;
        idx /= n;
    }
    out
}

pub(crate) fn ravel(coords: &[usize], n: usize) -> usize {
    coords.iter().fold(0, |acc, c| acc * n + c)
}
