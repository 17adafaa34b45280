//! Single-particle bilinear densities `(1/A) conj(psi_f) Q psi_i`, their
//! totals, and the eigenvalue-consistency checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{inner_product, SpatialGrid, WaveField};
use crate::operators::{derivative, gradient_product, hamiltonian_apply, Derivative};

/// `|A|` must exceed this multiple of `||psi_f|| ||psi_i||`.
pub const AMPLITUDE_FLOOR_FACTOR: f64 = 1e-10;

/// Eigen-consistency passes when `|total - eigenvalue|` is below this.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// Maximum relative residual `||Q v - q v|| / (||v|| max(1, |q|))` for `v`
/// to count as an eigenvector.
pub const EIGENVECTOR_TOLERANCE: f64 = 1e-10;

/// Which physical quantity a density describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Mass(f64),
    Charge(f64),
    Momentum,
    /// Kinetic `(1/2m) grad f* . grad psi` plus `V f* psi`.
    Energy { mass: f64, potential: Vec<f64> },
    /// `(e/m)` times the momentum density.
    Current { charge: f64, mass: f64 },
    /// `conj(f) (M psi)` for a dense matrix `M`.
    Custom(DMatrix<Complex64>),
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::Mass(_) => "mass",
            Observable::Charge(_) => "charge",
            Observable::Momentum => "momentum",
            Observable::Energy { .. } => "energy",
            Observable::Current { .. } => "current",
            Observable::Custom(_) => "custom",
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("{what} observable: {}", self.name())));
        match self {
            Observable::Mass(m) if !(m.is_finite() && *m > 0.0) => bad("mass must be positive in"),
            Observable::Charge(e) if !e.is_finite() => bad("non-finite charge in"),
            Observable::Energy { mass, potential } => {
                if !(mass.is_finite() && *mass > 0.0) {
                    bad("mass must be positive in")
                } else if potential.len() != n {
                    Err(Error::LengthMismatch {
                        expected: n,
                        got: potential.len(),
                    })
                } else {
                    Ok(())
                }
            }
            Observable::Current { charge, mass } if !(mass.is_finite() && *mass > 0.0 && charge.is_finite()) => {
                bad("bad charge/mass in")
            }
            Observable::Custom(m) => {
                if m.nrows() != n || m.ncols() != n {
                    Err(Error::LengthMismatch {
                        expected: n,
                        got: m.nrows(),
                    })
                } else if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                    Err(Error::NonFinite("custom observable matrix"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// Form of the momentum (and current) density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumForm {
    /// `(1/2i) [f* D psi - (D f*) psi]`.
    #[default]
    Symmetrized,
    /// `(1/i) f* D psi`; same total, different local values.
    RightActing,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DensityOptions {
    pub derivative: Derivative,
    pub momentum_form: MomentumForm,
}

/// Density values `Q(x)` at one time together with the amplitude used.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: SpatialGrid,
    values: Vec<Complex64>,
    quantity: &'static str,
    time: f64,
    amplitude: Complex64,
}

impl DensityField {
    pub(crate) fn new(grid: SpatialGrid, values: Vec<Complex64>, quantity: &'static str, time: f64, amplitude: Complex64) -> Self {
        Self {
            grid,
            values,
            quantity,
            time,
            amplitude,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn quantity(&self) -> &'static str {
        self.quantity
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    /// Pointwise sum, keeping `self`'s metadata.
    pub fn sum_with(&self, other: &DensityField) -> Result<DensityField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// `sqrt(sum |a - b|^2 dx)`.
    pub fn l2_distance(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok((self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            * self.grid.dx())
        .sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `A = <psi_f|psi_i>`.
pub fn amplitude(psi_f: &WaveField, psi_i: &WaveField) -> Result<Complex64> {
    inner_product(psi_f, psi_i)
}

pub fn amplitude_floor(psi_f_norm: f64, psi_i_norm: f64) -> f64 {
    AMPLITUDE_FLOOR_FACTOR * psi_f_norm * psi_i_norm
}

pub(crate) fn check_amplitude(a: Complex64, floor: f64) -> Result<()> {
    if a.norm() <= floor || !a.norm().is_finite() {
        Err(Error::AmplitudeNearZero { amplitude: a, floor })
    } else {
        Ok(())
    }
}

/// Unnormalized local bilinear `conj(bra) Q ket` at every node. Shared by
/// the wavefunction route, the propagator sandwich and the many-body
/// marginals so that all of them use one discretization.
pub fn local_bilinear(
    obs: &Observable,
    bra: &[Complex64],
    ket: &[Complex64],
    grid: &SpatialGrid,
    opts: DensityOptions,
) -> Vec<Complex64> {
    let pointwise = |scale: f64| -> Vec<Complex64> {
        bra.iter().zip(ket).map(|(f, p)| f.conj() * p * scale).collect()
    };
    match obs {
        Observable::Mass(m) => pointwise(*m),
        Observable::Charge(e) => pointwise(*e),
        Observable::Momentum => momentum_bilinear(bra, ket, grid, opts),
        Observable::Current { charge, mass } => momentum_bilinear(bra, ket, grid, opts)
            .into_iter()
            .map(|v| v * (charge / mass))
            .collect(),
        Observable::Energy { mass, potential } => gradient_product(bra, ket, grid)
            .into_iter()
            .zip(bra.iter().zip(ket).zip(potential))
            .map(|(kin, ((f, p), v))| kin / (2.0 * mass) + f.conj() * p * *v)
            .collect(),
        Observable::Custom(m) => {
            let applied = m * DVector::from_column_slice(ket);
            bra.iter().zip(applied.iter()).map(|(f, q)| f.conj() * q).collect()
        }
    }
}

fn momentum_bilinear(bra: &[Complex64], ket: &[Complex64], grid: &SpatialGrid, opts: DensityOptions) -> Vec<Complex64> {
    let minus_i = Complex64::new(0.0, -1.0);
    let dket = derivative(ket, grid, opts.derivative);
    match opts.momentum_form {
        MomentumForm::RightActing => bra
            .iter()
            .zip(&dket)
            .map(|(f, d)| f.conj() * d * minus_i)
            .collect(),
        MomentumForm::Symmetrized => {
            let dbra = derivative(bra, grid, opts.derivative);
            bra.iter()
                .zip(&dket)
                .zip(dbra.iter().zip(ket))
                .map(|((f, dp), (df, p))| (f.conj() * dp - df.conj() * p) * (0.5 * minus_i))
                .collect()
        }
    }
}

/// Density of `obs` for the boundary pair with default options.
pub fn density(obs: &Observable, psi_f: &WaveField, psi_i: &WaveField) -> Result<DensityField> {
    density_with(obs, psi_f, psi_i, DensityOptions::default())
}

pub fn density_with(obs: &Observable, psi_f: &WaveField, psi_i: &WaveField, opts: DensityOptions) -> Result<DensityField> {
    let a = amplitude(psi_f, psi_i)?;
    check_amplitude(a, amplitude_floor(psi_f.norm(), psi_i.norm()))?;
    obs.validate(psi_i.grid().n_points())?;
    let inv = 1.0 / a;
    let values = local_bilinear(obs, psi_f.values(), psi_i.values(), psi_i.grid(), opts)
        .into_iter()
        .map(|v| v * inv)
        .collect();
    Ok(DensityField::new(*psi_i.grid(), values, obs.name(), psi_i.time(), a))
}

/// `sum Q(x) dx`.
pub fn total(d: &DensityField) -> Complex64 {
    d.values.iter().sum::<Complex64>() * d.grid.dx()
}

/// `Q psi` for the operator behind `obs` (matching the density's
/// discretization, so that `total = <f|Q|psi>/A`).
pub fn apply_observable(obs: &Observable, psi: &WaveField, opts: DensityOptions) -> Result<WaveField> {
    obs.validate(psi.grid().n_points())?;
    let g = psi.grid();
    let v = psi.values();
    let minus_i = Complex64::new(0.0, -1.0);
    let out: Vec<Complex64> = match obs {
        Observable::Mass(m) => v.iter().map(|x| x * *m).collect(),
        Observable::Charge(e) => v.iter().map(|x| x * *e).collect(),
        Observable::Momentum => derivative(v, g, opts.derivative).into_iter().map(|d| d * minus_i).collect(),
        Observable::Current { charge, mass } => derivative(v, g, opts.derivative)
            .into_iter()
            .map(|d| d * minus_i * (charge / mass))
            .collect(),
        Observable::Energy { mass, potential } => hamiltonian_apply(v, g, potential, *mass),
        Observable::Custom(m) => (m * DVector::from_column_slice(v)).as_slice().to_vec(),
    };
    WaveField::new(*g, out, psi.time())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSide {
    Initial,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenReport {
    pub total: Complex64,
    pub eigenvalue: f64,
    pub abs_error: f64,
    pub passed: bool,
}

/// Checks that the total of the density equals the eigenvalue when either
/// boundary state is an eigenvector of `obs`, whatever the other state is.
pub fn eigen_consistency_check(
    obs: &Observable,
    side: EigenSide,
    eigenfield: &WaveField,
    other: &WaveField,
    opts: DensityOptions,
) -> Result<EigenReport> {
    let applied = apply_observable(obs, eigenfield, opts)?;
    let norm_sqr = eigenfield.norm_sqr();
    let q = inner_product(eigenfield, &applied)? / norm_sqr;
    let residual = applied.add_scaled(-q, eigenfield)?.norm() / (norm_sqr.sqrt() * q.norm().max(1.0));
    if residual > EIGENVECTOR_TOLERANCE || q.im.abs() > EIGENVECTOR_TOLERANCE * q.norm().max(1.0) {
        return Err(Error::NotAnEigenvector { residual });
    }
    let d = match side {
        EigenSide::Initial => density_with(obs, other, eigenfield, opts)?,
        EigenSide::Final => density_with(obs, eigenfield, other, opts)?,
    };
    let t = total(&d);
    let abs_error = (t - Complex64::new(q.re, 0.0)).norm();
    Ok(EigenReport {
        total: t,
        eigenvalue: q.re,
        abs_error,
        passed: abs_error < EIGEN_TOLERANCE,
    })
}
