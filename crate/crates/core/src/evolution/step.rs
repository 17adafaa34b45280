use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{SpatialGrid, WaveField};
use crate::operators::hamiltonian_matrix;

/// Dense Crank-Nicolson propagator for one time step of length `dt`.
#[derive(Debug, Clone)]
pub struct StepOperator {
    grid: SpatialGrid,
    dt: f64,
    forward: DMatrix<Complex64>,
    /// Time window this operator may be used in, and the segment it came from.
    window: (f64, f64),
    segment: Option<usize>,
}

/// `U = (I + i dt H / 2)^-1 (I - i dt H / 2)` with
/// `H = -(1/2) D2 + diag(V)`.
pub fn build_step(grid: &SpatialGrid, potential: &[f64], dt: f64) -> Result<StepOperator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
    }
    if potential.len() != grid.n_points() {
        return Err(Error::LengthMismatch {
            expected: grid.n_points(),
            got: potential.len(),
        });
    }
    let h = hamiltonian_matrix(grid, potential).map(|v| Complex64::new(v, 0.0));
    let n = grid.n_points();
    let half = Complex64::new(0.0, 0.5 * dt);
    let eye = DMatrix::<Complex64>::identity(n, n);
    let implicit = &eye + &h * half;
    let explicit = &eye - &h * half;
    let forward = implicit.lu().solve(&explicit).ok_or(Error::SingularSolve)?;
    if forward.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::SingularSolve);
    }
    Ok(StepOperator {
        grid: *grid,
        dt,
        forward,
        window: (f64::NEG_INFINITY, f64::INFINITY),
        segment: None,
    })
}

impl StepOperator {
    pub(crate) fn with_window(mut self, t_start: f64, t_end: f64, segment: usize) -> Self {
        self.window = (t_start, t_end);
        self.segment = Some(segment);
        self
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.forward
    }

    pub fn segment(&self) -> Option<usize> {
        self.segment
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.forward)
    }

    fn check(&self, field: &WaveField, t0: f64, t1: f64) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let slack = 1e-9 * self.dt;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if lo + slack < self.window.0 || hi > self.window.1 + slack {
            return Err(Error::StepStraddlesSegment { t0: lo, t1: hi });
        }
        Ok(())
    }

    pub(crate) fn apply(&self, values: &[Complex64]) -> Vec<Complex64> {
        let v = DVector::from_column_slice(values);
        (&self.forward * v).as_slice().to_vec()
    }

    pub(crate) fn apply_adjoint(&self, values: &[Complex64]) -> Vec<Complex64> {
        let v = DVector::from_column_slice(values);
        self.forward.ad_mul(&v).as_slice().to_vec()
    }
}

pub fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let prod = m.ad_mul(m);
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((prod[(r, c)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// `psi <- U psi`, `t <- t + dt`.
pub fn step_forward(field: &WaveField, op: &StepOperator) -> Result<WaveField> {
    op.check(field, field.time(), field.time() + op.dt)?;
    Ok(WaveField::from_parts_unchecked(
        op.grid,
        op.apply(field.values()),
        field.time() + op.dt,
    ))
}

/// `psi <- U^dagger psi`, `t <- t - dt`.
pub fn step_backward(field: &WaveField, op: &StepOperator) -> Result<WaveField> {
    op.check(field, field.time() - op.dt, field.time())?;
    Ok(WaveField::from_parts_unchecked(
        op.grid,
        op.apply_adjoint(field.values()),
        field.time() - op.dt,
    ))
}
