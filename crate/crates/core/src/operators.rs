//! Discrete differential operators shared by evolution, densities and the
//! conservation checks.
//!
//! Two first-derivative schemes are offered. The spectral one is exact on
//! every resolvable Fourier mode and is the default on periodic grids; the
//! centered difference is used on hard-wall grids. Both are real
//! antisymmetric matrices, so `-i D` is Hermitian and the symmetrized
//! momentum density integrates to `<f| -i D |psi>`.
//!
//! Second derivatives always use the compact three-point stencil that
//! defines the evolution Hamiltonian. Gradient products are built from the
//! same link (forward) differences so that kinetic densities integrate to
//! `<f| -D2 |psi>` exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::fields::{SpatialGrid, WaveField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Derivative {
    /// Spectral on periodic grids, centered difference otherwise.
    #[default]
    Auto,
    Centered,
    Spectral,
}

impl Derivative {
    pub fn resolve(self, grid: &SpatialGrid) -> Derivative {
        match self {
            Derivative::Auto if grid.is_periodic() => Derivative::Spectral,
            Derivative::Auto => Derivative::Centered,
            Derivative::Spectral if !grid.is_periodic() => Derivative::Centered,
            other => other,
        }
    }
}

fn at(values: &[Complex64], grid: &SpatialGrid, k: usize, offset: isize) -> Complex64 {
    grid.neighbour(k, offset)
        .map(|j| values[j])
        .unwrap_or_default()
}

/// First derivative `D u`.
pub fn derivative(values: &[Complex64], grid: &SpatialGrid, scheme: Derivative) -> Vec<Complex64> {
    match scheme.resolve(grid) {
        Derivative::Spectral => spectral_derivative(values, grid),
        _ => {
            let inv = 1.0 / (2.0 * grid.dx());
            (0..values.len())
                .map(|k| (at(values, grid, k, 1) - at(values, grid, k, -1)) * inv)
                .collect()
        }
    }
}

fn spectral_derivative(values: &[Complex64], grid: &SpatialGrid) -> Vec<Complex64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf = values.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let base = 2.0 * PI / grid.length();
    for (j, v) in buf.iter_mut().enumerate() {
        // Nyquist mode has no odd partner; dropping it keeps D real and
        // antisymmetric.
        let signed = if 2 * j < n {
            j as f64
        } else if 2 * j == n {
            0.0
        } else {
            j as f64 - n as f64
        };
        *v *= Complex64::new(0.0, base * signed / n as f64);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

/// Compact second difference `(u[k+1] - 2u[k] + u[k-1]) / dx^2`.
pub fn laplacian(values: &[Complex64], grid: &SpatialGrid) -> Vec<Complex64> {
    let inv = 1.0 / (grid.dx() * grid.dx());
    (0..values.len())
        .map(|k| (at(values, grid, k, 1) - values[k] * 2.0 + at(values, grid, k, -1)) * inv)
        .collect()
}

/// `(-1/(2m)) D2 u + V u`.
pub fn hamiltonian_apply(
    values: &[Complex64],
    grid: &SpatialGrid,
    potential: &[f64],
    mass: f64,
) -> Vec<Complex64> {
    laplacian(values, grid)
        .into_iter()
        .zip(values.iter().zip(potential))
        .map(|(lap, (u, v))| lap * (-0.5 / mass) + u * *v)
        .collect()
}

/// Dense real symmetric Hamiltonian matrix (unit mass).
pub fn hamiltonian_matrix(grid: &SpatialGrid, potential: &[f64]) -> DMatrix<f64> {
    let n = grid.n_points();
    let inv = 1.0 / (grid.dx() * grid.dx());
    let mut h = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        h[(k, k)] = inv + potential[k];
        for off in [-1isize, 1] {
            if let Some(j) = grid.neighbour(k, off) {
                h[(k, j)] += -0.5 * inv;
            }
        }
    }
    h
}

/// Forward difference on the link to the right of each node,
/// `(u[k+1] - u[k]) / dx`, with zero beyond a hard wall.
pub fn link_difference(values: &[Complex64], grid: &SpatialGrid) -> Vec<Complex64> {
    let inv = 1.0 / grid.dx();
    (0..values.len())
        .map(|k| (at(values, grid, k, 1) - values[k]) * inv)
        .collect()
}

/// Pointwise `conj(grad bra) . grad ket`, formed by splitting each link
/// product evenly between its two end nodes (wall links go wholly to the
/// adjacent node). Summed times `dx` this equals `<bra| -D2 |ket>`.
pub fn gradient_product(bra: &[Complex64], ket: &[Complex64], grid: &SpatialGrid) -> Vec<Complex64> {
    let n = bra.len();
    let db = link_difference(bra, grid);
    let dk = link_difference(ket, grid);
    let link: Vec<Complex64> = db.iter().zip(&dk).map(|(a, b)| a.conj() * b).collect();
    let mut out = vec![Complex64::default(); n];
    for k in 0..n {
        let right = link[k];
        let left = match grid.neighbour(k, -1) {
            Some(j) => link[j],
            // link from the left wall (value 0) into node 0
            None => {
                let inv = 1.0 / grid.dx();
                (bra[k] * inv).conj() * (ket[k] * inv)
            }
        };
        let (wl, wr) = match (grid.neighbour(k, -1), grid.neighbour(k, 1)) {
            (None, _) => (1.0, 0.5),
            (_, None) => (0.5, 1.0),
            _ => (0.5, 0.5),
        };
        out[k] = left * wl + right * wr;
    }
    out
}

/// `-i D psi` as a field.
pub fn momentum_apply(field: &WaveField, scheme: Derivative) -> Result<WaveField> {
    let d = derivative(field.values(), field.grid(), scheme);
    WaveField::new(
        *field.grid(),
        d.into_iter().map(|v| v * Complex64::new(0.0, -1.0)).collect(),
        field.time(),
    )
}
