use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    HardWall,
}

/// Uniform 1D sampling of the position coordinate.
///
/// On a hard-wall grid the `n_points` samples are the interior nodes; the
/// walls sit one spacing outside on either side, where the field vanishes.
/// The trapezoid rule over `[origin - dx, origin + n_points*dx]` therefore
/// reduces to the same plain `sum * dx` used on periodic grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr")]
pub struct SpatialGrid {
    n_points: usize,
    dx: f64,
    origin: f64,
    boundary: Boundary,
}

#[derive(Deserialize)]
struct GridRepr {
    n_points: usize,
    dx: f64,
    origin: f64,
    boundary: Boundary,
}

impl TryFrom<GridRepr> for SpatialGrid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        SpatialGrid::new(r.n_points, r.dx, r.origin, r.boundary)
    }
}

impl SpatialGrid {
    pub fn new(n_points: usize, dx: f64, origin: f64, boundary: Boundary) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} < {MIN_POINTS}"
            )));
        }
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidGrid(format!("dx = {dx} must be positive")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            n_points,
            dx,
            origin,
            boundary,
        })
    }

    /// Periodic grid of `n_points` covering `[start, end)`.
    pub fn periodic(n_points: usize, start: f64, end: f64) -> Result<Self> {
        Self::new(n_points, (end - start) / n_points as f64, start, Boundary::Periodic)
    }

    /// Hard-wall grid whose interior nodes span `[start, end]` inclusive.
    pub fn hard_wall(n_points: usize, start: f64, end: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        Self::new(
            n_points,
            (end - start) / (n_points - 1) as f64,
            start,
            Boundary::HardWall,
        )
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.coordinate(k)).collect()
    }

    /// Period length `n_points * dx`.
    pub fn length(&self) -> f64 {
        self.n_points as f64 * self.dx
    }

    /// Index of the node nearest to `x` (clamped).
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x - self.origin) / self.dx).round();
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Neighbour index with wrap-around, or `None` past a hard wall.
    pub(crate) fn neighbour(&self, k: usize, offset: isize) -> Option<usize> {
        let n = self.n_points as isize;
        let j = k as isize + offset;
        if (0..n).contains(&j) {
            Some(j as usize)
        } else if self.is_periodic() {
            Some(j.rem_euclid(n) as usize)
        } else {
            None
        }
    }
}
