//! Factories for the boundary states used throughout the crate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::SpatialGrid;
use super::wave::WaveField;
use crate::error::{Error, Result};

/// Largest admissible edge value (relative to the peak) for packets on
/// hard-wall grids.
pub const BOUNDARY_TAIL: f64 = 1e-10;

/// Width of the narrow-peak stand-in for a position eigenstate, in units
/// of the grid spacing.
pub const NARROW_PEAK_CELLS: f64 = 3.0;

/// Normalized `exp(i k x) exp(-(x - c)^2 / (2 width^2))`.
pub fn make_gaussian(
    grid: &SpatialGrid,
    center: f64,
    width: f64,
    wavenumber: f64,
    time: f64,
) -> Result<WaveField> {
    if !(width > 2.0 * grid.dx()) {
        return Err(Error::UnresolvedWidth {
            width,
            dx: grid.dx(),
        });
    }
    let envelope = |x: f64| (-(x - center).powi(2) / (2.0 * width * width)).exp();
    if !grid.is_periodic() {
        let first = grid.coordinate(0);
        let last = grid.coordinate(grid.n_points() - 1);
        let tail = envelope(first).max(envelope(last));
        if tail >= BOUNDARY_TAIL {
            return Err(Error::InvalidConfig(format!(
                "packet tail {tail:e} at hard wall exceeds {BOUNDARY_TAIL:e}"
            )));
        }
    }
    let values = grid
        .coordinates()
        .into_iter()
        .map(|x| Complex64::from_polar(envelope(x), wavenumber * x))
        .collect();
    WaveField::new(*grid, values, time)?.normalized()
}

/// Resolvable stand-in for a position eigenstate: a real Gaussian of width
/// `NARROW_PEAK_CELLS * dx`.
pub fn make_narrow_peak(grid: &SpatialGrid, center: f64, time: f64) -> Result<WaveField> {
    make_gaussian(grid, center, NARROW_PEAK_CELLS * grid.dx(), 0.0, time)
}

/// Wavenumber of Fourier mode `mode` on a periodic grid.
pub fn mode_wavenumber(grid: &SpatialGrid, mode: i64) -> f64 {
    2.0 * PI * mode as f64 / grid.length()
}

/// Normalized discrete plane wave `exp(i k x) / sqrt(L)`.
pub fn make_plane_wave(grid: &SpatialGrid, mode: i64, time: f64) -> Result<WaveField> {
    if !grid.is_periodic() {
        return Err(Error::NonPeriodicGrid);
    }
    let n = grid.n_points();
    if mode.unsigned_abs() as usize * 2 >= n {
        return Err(Error::ModeOutOfRange { mode, n_points: n });
    }
    let amp = 1.0 / grid.length().sqrt();
    // Phase from the integer index keeps the mode exactly periodic on the grid.
    let k = mode_wavenumber(grid, mode);
    let values = (0..n)
        .map(|j| {
            let phase = 2.0 * PI * ((mode * j as i64).rem_euclid(n as i64)) as f64 / n as f64;
            Complex64::from_polar(amp, phase + k * grid.origin())
        })
        .collect();
    WaveField::new(*grid, values, time)
}

/// Binary aperture mask: 1 within `half_width` of any centre, 0 elsewhere.
pub fn slit_mask(grid: &SpatialGrid, centers: &[f64], half_width: f64) -> Vec<f64> {
    grid.coordinates()
        .into_iter()
        .map(|x| {
            let open = centers
                .iter()
                .any(|c| (x - c).abs() <= half_width + 1e-12 * grid.dx());
            if open {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Normalized field with independent complex Gaussian entries, reproducible
/// from `seed`.
pub fn random_field(grid: &SpatialGrid, seed: u64, time: f64) -> WaveField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<Complex64> = (0..grid.n_points())
        .map(|_| Complex64::new(standard_normal(&mut rng), standard_normal(&mut rng)))
        .collect();
    WaveField::from_parts_unchecked(*grid, values, time)
        .normalized()
        .expect("random field is nonzero")
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; rand_distr is not needed for one distribution.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}
