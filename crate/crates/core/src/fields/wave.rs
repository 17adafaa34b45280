use num_complex::Complex64;

use super::grid::SpatialGrid;
use crate::error::{Error, Result};

/// Time tags closer than this are treated as the same instant.
pub const TIME_TOLERANCE: f64 = 1e-12;

/// Complex amplitudes on a [`SpatialGrid`] at one instant.
///
/// Both the forward-evolved initial state and the backward-evolved final
/// state are carried by this type.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    time: f64,
}

impl WaveField {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("wave field values"));
        }
        if !time.is_finite() {
            return Err(Error::NonFinite("wave field time"));
        }
        Ok(Self { grid, values, time })
    }

    pub(crate) fn from_parts_unchecked(grid: SpatialGrid, values: Vec<Complex64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values, time }
    }

    pub fn zeros(grid: SpatialGrid, time: f64) -> Self {
        Self::from_parts_unchecked(grid, vec![Complex64::default(); grid.n_points()], time)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self::from_parts_unchecked(self.grid, values, self.time)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::InvalidConfig("cannot normalize a zero field".into()));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        self.with_values(self.values.iter().map(|v| v * factor).collect())
    }

    /// Same grid and time tag (within [`TIME_TOLERANCE`]).
    pub fn check_compatible(&self, other: &WaveField) -> Result<()> {
        if self.grid != other.grid {
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

    /// `self + c * other`, keeping `self`'s time tag.
    pub fn add_scaled(&self, c: Complex64, other: &WaveField) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        ))
    }

    pub fn expectation_position(&self) -> f64 {
        let dx = self.grid.dx();
        let w: f64 = self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx;
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| self.grid.coordinate(k) * v.norm_sqr() * dx)
            .sum::<f64>()
            / w
    }

    /// Standard deviation of `|psi|^2` treated as a weight.
    pub fn position_spread(&self) -> f64 {
        let weights: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        weighted_spread(&self.grid, &weights)
    }
}

/// Root second central moment of non-negative `weights` over the grid.
pub fn weighted_spread(grid: &SpatialGrid, weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = weights
        .iter()
        .enumerate()
        .map(|(k, w)| grid.coordinate(k) * w)
        .sum::<f64>()
        / total;
    let var = weights
        .iter()
        .enumerate()
        .map(|(k, w)| (grid.coordinate(k) - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    var.sqrt()
}

/// Quadrature form of `<bra|ket>`: `sum conj(bra) * ket * dx`.
pub fn inner_product(bra: &WaveField, ket: &WaveField) -> Result<Complex64> {
    bra.check_compatible(ket)?;
    Ok(raw_inner(&bra.values, &ket.values) * bra.grid.dx())
}

pub(crate) fn raw_inner(bra: &[Complex64], ket: &[Complex64]) -> Complex64 {
    bra.iter().zip(ket).map(|(a, b)| a.conj() * b).sum()
}

/// Pointwise aperture projection. The result is deliberately left
/// unnormalized.
pub fn apply_mask(field: &WaveField, mask: &[f64]) -> Result<WaveField> {
    if mask.len() != field.grid.n_points() {
        return Err(Error::GridMismatch);
    }
    Ok(field.with_values(
        field
            .values
            .iter()
            .zip(mask)
            .map(|(v, m)| v * *m)
            .collect(),
    ))
}
