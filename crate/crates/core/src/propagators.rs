//! Discrete retarded and advanced propagators.
//!
//! A propagator is stored as the matrix `P` that maps grid values at one
//! time to grid values at another, so the continuum kernel is `K ~ P / dx`.
//! The retarded matrix is the ordered product of Crank-Nicolson steps; the
//! advanced matrix is `-P^dagger`, which makes `conj(K_A) = -K_R^T` hold
//! entry by entry.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::densities::{amplitude_floor, AMPLITUDE_FLOOR_FACTOR, check_amplitude, local_bilinear, DensityField, DensityOptions, Observable};
use crate::error::{Error, Result};
use crate::evolution::{Evolver, StepOperator};
use crate::fields::{SpatialGrid, WaveField, TIME_TOLERANCE};
use crate::multibody::permutations;

/// Largest grid on which dense propagators are formed.
pub const MAX_PROPAGATOR_POINTS: usize = 256;

/// Allowed `max |P^dagger P - I|` while building a propagator.
pub const UNITARITY_TOLERANCE: f64 = 1e-9;

/// Drift is checked every this many steps (and at the end).
const DRIFT_CHECK_EVERY: usize = 100;

/// Convention string written next to exported matrices.
pub const CONVENTION: &str = "P = K*dx";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagatorKind {
    Retarded,
    Advanced,
}

#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    grid: SpatialGrid,
    matrix: DMatrix<Complex64>,
    t_from: f64,
    t_to: f64,
    kind: PropagatorKind,
    /// Step operators this matrix was built from, in time order. Empty
    /// for identity matrices and for matrices loaded from elsewhere.
    factors: Vec<Arc<StepOperator>>,
    factored: bool,
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOLERANCE * (1.0 + a.abs().max(b.abs()))
}

fn order_error(t1: f64, t2: f64) -> Error {
    Error::TimeOrderViolation(format!("need t1 <= t2, got t1 = {t1}, t2 = {t2}"))
}

/// `P(t2, t1)`, the retarded propagator.
pub fn retarded(evolver: &Evolver, t1: f64, t2: f64) -> Result<PropagatorMatrix> {
    if t2 < t1 && !same_time(t1, t2) {
        return Err(order_error(t1, t2));
    }
    let grid = *evolver.grid();
    let n = grid.n_points();
    if n > MAX_PROPAGATOR_POINTS {
        return Err(Error::Unsupported(format!(
            "dense propagator on {n} > {MAX_PROPAGATOR_POINTS} points"
        )));
    }
    PropagatorMatrix {
        grid,
        matrix: DMatrix::identity(n, n),
        t_from: t1,
        t_to: t1,
        kind: PropagatorKind::Retarded,
        factors: Vec::new(),
        factored: true,
    }
    .extend(evolver, t2)
}

/// Advanced propagator for the interval `[t1, t2]`: `-P(t2, t1)^dagger`.
pub fn advanced(evolver: &Evolver, t1: f64, t2: f64) -> Result<PropagatorMatrix> {
    Ok(retarded(evolver, t1, t2)?.to_advanced())
}

impl PropagatorMatrix {
    /// Wrap an externally supplied matrix (e.g. one read from disk).
    pub fn from_parts(
        grid: SpatialGrid,
        matrix: DMatrix<Complex64>,
        t_from: f64,
        t_to: f64,
        kind: PropagatorKind,
    ) -> Result<Self> {
        let n = grid.n_points();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("propagator matrix"));
        }
        Ok(Self {
            grid,
            matrix,
            t_from,
            t_to,
            kind,
            factors: Vec::new(),
            factored: false,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn t_from(&self) -> f64 {
        self.t_from
    }

    pub fn t_to(&self) -> f64 {
        self.t_to
    }

    pub fn kind(&self) -> PropagatorKind {
        self.kind
    }

    pub fn unitarity_defect(&self) -> f64 {
        crate::evolution::unitarity_defect(&self.matrix)
    }

    /// Continue a retarded propagator from `t_to` up to `t_new`.
    pub fn extend(mut self, evolver: &Evolver, t_new: f64) -> Result<Self> {
        if self.kind != PropagatorKind::Retarded || !self.factored {
            return Err(Error::Unsupported("only step-built retarded propagators can be extended".into()));
        }
        if evolver.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if t_new < self.t_to && !same_time(t_new, self.t_to) {
            return Err(order_error(self.t_to, t_new));
        }
        let steps = evolver.steps_between(self.t_to, t_new)?.max(0) as usize;
        let t0 = self.t_to;
        for j in 0..steps {
            let ta = t0 + j as f64 * evolver.dt();
            let tb = t0 + (j + 1) as f64 * evolver.dt();
            let op = evolver.operator_for_step(ta, tb)?;
            self.matrix = op.matrix() * &self.matrix;
            self.factors.push(op);
            if (j + 1) % DRIFT_CHECK_EVERY == 0 || j + 1 == steps {
                let defect = self.unitarity_defect();
                if defect > UNITARITY_TOLERANCE {
                    return Err(Error::UnitarityDrift { defect });
                }
            }
        }
        if steps > 0 {
            self.t_to = t_new;
        }
        Ok(self)
    }

    /// `-P^dagger`, spanning the same interval in the opposite direction.
    pub fn to_advanced(&self) -> Self {
        let (t_from, t_to) = match self.kind {
            PropagatorKind::Retarded => (self.t_to, self.t_from),
            PropagatorKind::Advanced => (self.t_from, self.t_to),
        };
        let matrix = match self.kind {
            PropagatorKind::Retarded => -self.matrix.adjoint(),
            PropagatorKind::Advanced => self.matrix.clone(),
        };
        Self {
            grid: self.grid,
            matrix,
            t_from,
            t_to,
            kind: PropagatorKind::Advanced,
            factors: Vec::new(),
            factored: false,
        }
    }

    /// Transport a field from `t_from` to `t_to`. The advanced kernel
    /// carries a minus sign, so backward transport is `-K_A psi`.
    pub fn apply(&self, field: &WaveField) -> Result<WaveField> {
        self.check_field(field, self.t_from)?;
        let v = &self.matrix * DVector::from_column_slice(field.values());
        let sign = match self.kind {
            PropagatorKind::Retarded => 1.0,
            PropagatorKind::Advanced => -1.0,
        };
        let values = v.iter().map(|z| z * sign).collect();
        WaveField::new(self.grid, values, self.t_to)
    }

    /// Row-vector transport of a final-boundary field: the field whose
    /// conjugate is `psi_f^dagger P`, tagged with the retarded start time.
    pub fn row_transport(&self, psi_f: &WaveField) -> Result<WaveField> {
        if self.kind != PropagatorKind::Retarded {
            return Err(Error::Unsupported("row transport uses the retarded matrix".into()));
        }
        self.check_field(psi_f, self.t_to)?;
        let v = self.matrix.ad_mul(&DVector::from_column_slice(psi_f.values()));
        WaveField::new(self.grid, v.as_slice().to_vec(), self.t_from)
    }

    /// `<f| P |i> = sum conj(f) (P i) dx`.
    pub fn matrix_element(&self, bra: &WaveField, ket: &WaveField) -> Result<Complex64> {
        let moved = self.apply(ket)?;
        bra.check_compatible(&moved)?;
        Ok(raw_overlap(bra.values(), moved.values(), self.grid.dx()))
    }

    fn check_field(&self, field: &WaveField, expected: f64) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if !same_time(field.time(), expected) {
            return Err(Error::TimeMismatch {
                left: field.time(),
                right: expected,
            });
        }
        Ok(())
    }
}

fn raw_overlap(bra: &[Complex64], ket: &[Complex64], dx: f64) -> Complex64 {
    bra.iter().zip(ket).map(|(f, p)| f.conj() * p).sum::<Complex64>() * dx
}

fn check_join(later: &PropagatorMatrix, earlier: &PropagatorMatrix) -> Result<()> {
    if later.grid != earlier.grid {
        return Err(Error::GridMismatch);
    }
    if later.kind != PropagatorKind::Retarded || earlier.kind != PropagatorKind::Retarded {
        return Err(Error::Unsupported("composition is defined for retarded propagators".into()));
    }
    if !same_time(later.t_from, earlier.t_to) {
        return Err(Error::TimeMismatch {
            left: later.t_from,
            right: earlier.t_to,
        });
    }
    Ok(())
}

/// `P(t3, t2) P(t2, t1)`. When the later factor was built from steps, the
/// steps are multiplied onto the earlier matrix one at a time, which is
/// the same evaluation order [`retarded`] uses; the result then equals
/// `retarded(t1, t3)` bit for bit.
pub fn compose(later: &PropagatorMatrix, earlier: &PropagatorMatrix) -> Result<PropagatorMatrix> {
    check_join(later, earlier)?;
    if !(later.factored && earlier.factored) {
        return dense_product(later, earlier);
    }
    let mut matrix = earlier.matrix.clone();
    for op in &later.factors {
        matrix = op.matrix() * &matrix;
    }
    let mut factors = earlier.factors.clone();
    factors.extend(later.factors.iter().cloned());
    Ok(PropagatorMatrix {
        grid: earlier.grid,
        matrix,
        t_from: earlier.t_from,
        t_to: later.t_to,
        kind: PropagatorKind::Retarded,
        factors,
        factored: true,
    })
}

/// Plain dense product of two retarded matrices.
pub fn dense_product(later: &PropagatorMatrix, earlier: &PropagatorMatrix) -> Result<PropagatorMatrix> {
    check_join(later, earlier)?;
    Ok(PropagatorMatrix {
        grid: earlier.grid,
        matrix: &later.matrix * &earlier.matrix,
        t_from: earlier.t_from,
        t_to: later.t_to,
        kind: PropagatorKind::Retarded,
        factors: Vec::new(),
        factored: false,
    })
}

/// The three retarded matrices around a break time: `P(t, t1)`,
/// `P(t2, t)` and their composition `P(t2, t1)`.
struct Sandwich {
    early: PropagatorMatrix,
    late: PropagatorMatrix,
    full: PropagatorMatrix,
}

fn sandwich(evolver: &Evolver, t1: f64, t: f64, t2: f64) -> Result<Sandwich> {
    if !(t1 < t && t < t2) || same_time(t1, t) || same_time(t, t2) {
        return Err(Error::TimeOrderViolation(format!(
            "need t1 < t < t2, got {t1}, {t}, {t2}"
        )));
    }
    let early = retarded(evolver, t1, t)?;
    let late = retarded(evolver, t, t2)?;
    let full = compose(&late, &early)?;
    Ok(Sandwich { early, late, full })
}

fn check_boundary(field: &WaveField, t: f64) -> Result<()> {
    if same_time(field.time(), t) {
        Ok(())
    } else {
        Err(Error::TimeMismatch {
            left: field.time(),
            right: t,
        })
    }
}

/// `(1/A) [psi_f^dagger P(t2, t)] Q [P(t, t1) psi_i]` at every node, with
/// `A = psi_f^dagger P(t2, t1) psi_i`.
#[allow(clippy::too_many_arguments)]
pub fn broken_line_density(
    obs: &Observable,
    psi_f: &WaveField,
    psi_i: &WaveField,
    evolver: &Evolver,
    t1: f64,
    t: f64,
    t2: f64,
    opts: DensityOptions,
) -> Result<DensityField> {
    check_boundary(psi_i, t1)?;
    check_boundary(psi_f, t2)?;
    let s = sandwich(evolver, t1, t, t2)?;
    let a = s.full.matrix_element(psi_f, psi_i)?;
    check_amplitude(a, amplitude_floor(psi_f.norm(), psi_i.norm()))?;
    let ket = s.early.apply(psi_i)?;
    let bra = s.late.row_transport(psi_f)?;
    let grid = *evolver.grid();
    let inv = 1.0 / a;
    let values = local_bilinear(obs, bra.values(), ket.values(), &grid, opts)
        .into_iter()
        .map(|v| v * inv)
        .collect();
    Ok(DensityField::new(grid, values, obs.name(), t, a))
}

/// Boundary states of a two-fermion process.
#[derive(Debug, Clone)]
pub struct FermionPair<'a> {
    pub ia: &'a WaveField,
    pub ib: &'a WaveField,
    pub fa: &'a WaveField,
    pub fb: &'a WaveField,
}

impl FermionPair<'_> {
    fn check(&self, t1: f64, t2: f64) -> Result<()> {
        check_boundary(self.ia, t1)?;
        check_boundary(self.ib, t1)?;
        check_boundary(self.fa, t2)?;
        check_boundary(self.fb, t2)?;
        Ok(())
    }

    /// `|psi_f2| |psi_i2|` for the antisymmetrized pairs.
    fn norm_product(&self) -> Result<f64> {
        let pair_norm = |a: &WaveField, b: &WaveField| -> Result<f64> {
            let ov = crate::fields::inner_product(a, b)?;
            Ok((a.norm_sqr() * b.norm_sqr() - ov.norm_sqr()).max(0.0).sqrt())
        };
        Ok(pair_norm(self.ia, self.ib)? * pair_norm(self.fa, self.fb)?)
    }
}

fn pair_amplitude(m: impl Fn(&WaveField, &WaveField) -> Result<Complex64>, p: &FermionPair) -> Result<Complex64> {
    Ok(m(p.fa, p.ia)? * m(p.fb, p.ib)? - m(p.fb, p.ia)? * m(p.fa, p.ib)?)
}

/// Direct minus exchange: `<fa|P|ia><fb|P|ib> - <fb|P|ia><fa|P|ib>`.
pub fn appendix_amplitude(pair: &FermionPair, evolver: &Evolver, t1: f64, t2: f64) -> Result<Complex64> {
    pair.check(t1, t2)?;
    let p = retarded(evolver, t1, t2)?;
    pair_amplitude(|f, i| p.matrix_element(f, i), pair)
}

/// The four unnormalized terms of the two-fermion density, in the order
/// direct-a, direct-b, exchange-a, exchange-b, plus the amplitude.
fn appendix_terms(
    obs: &Observable,
    pair: &FermionPair,
    evolver: &Evolver,
    t1: f64,
    t: f64,
    t2: f64,
    opts: DensityOptions,
) -> Result<(Complex64, [Vec<Complex64>; 4])> {
    pair.check(t1, t2)?;
    let s = sandwich(evolver, t1, t, t2)?;
    let m = |f: &WaveField, i: &WaveField| s.full.matrix_element(f, i);
    let a = pair_amplitude(m, pair)?;
    check_amplitude(a, AMPLITUDE_FLOOR_FACTOR * pair.norm_product()?)?;
    let grid = *evolver.grid();
    let ket_a = s.early.apply(pair.ia)?;
    let ket_b = s.early.apply(pair.ib)?;
    let bra_a = s.late.row_transport(pair.fa)?;
    let bra_b = s.late.row_transport(pair.fb)?;
    let q = |bra: &WaveField, ket: &WaveField| local_bilinear(obs, bra.values(), ket.values(), &grid, opts);
    let scaled = |v: Vec<Complex64>, c: Complex64| -> Vec<Complex64> { v.into_iter().map(|x| x * c).collect() };
    let terms = [
        scaled(q(&bra_a, &ket_a), m(pair.fb, pair.ib)?),
        scaled(q(&bra_b, &ket_b), m(pair.fa, pair.ia)?),
        scaled(q(&bra_b, &ket_a), -m(pair.fa, pair.ib)?),
        scaled(q(&bra_a, &ket_b), -m(pair.fb, pair.ia)?),
    ];
    Ok((a, terms))
}

/// Two-fermion density at `t` assembled from propagator matrices: the two
/// direct terms minus the two exchange terms, over the pair amplitude.
#[allow(clippy::too_many_arguments)]
pub fn appendix_density(
    obs: &Observable,
    pair: &FermionPair,
    evolver: &Evolver,
    t1: f64,
    t: f64,
    t2: f64,
    opts: DensityOptions,
) -> Result<DensityField> {
    let (a, terms) = appendix_terms(obs, pair, evolver, t1, t, t2, opts)?;
    let inv = 1.0 / a;
    let n = evolver.grid().n_points();
    let values = (0..n)
        .map(|k| (terms[0][k] + terms[1][k] + terms[2][k] + terms[3][k]) * inv)
        .collect();
    Ok(DensityField::new(*evolver.grid(), values, obs.name(), t, a))
}

/// Direct and exchange parts of the two-fermion density, each over `A`.
pub fn appendix_direct_exchange(
    obs: &Observable,
    pair: &FermionPair,
    evolver: &Evolver,
    times: (f64, f64, f64),
    opts: DensityOptions,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let (a, terms) = appendix_terms(obs, pair, evolver, times.0, times.1, times.2, opts)?;
    let inv = 1.0 / a;
    let n = evolver.grid().n_points();
    let direct = (0..n).map(|k| (terms[0][k] + terms[1][k]) * inv).collect();
    let exchange = (0..n).map(|k| (terms[2][k] + terms[3][k]) * inv).collect();
    Ok((direct, exchange))
}

/// A signed product of propagator lines; `lines[j] = (final, initial)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagram {
    pub sign: f64,
    pub lines: Vec<(usize, usize)>,
}

impl Diagram {
    /// All diagrams of an `n`-fermion amplitude: one per permutation,
    /// initial state `k` joined to final state `perm[k]`.
    pub fn fermionic(n: usize) -> Vec<Diagram> {
        permutations(n)
            .into_iter()
            .map(|(perm, odd)| Diagram {
                sign: if odd { -1.0 } else { 1.0 },
                lines: perm.iter().enumerate().map(|(k, &f)| (f, k)).collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TermCheck {
    pub diagram: usize,
    pub broken_line: (usize, usize),
    pub sign: f64,
    /// Integral of the term over x, already divided by the amplitude.
    pub integrated: Complex64,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubstitutionReport {
    pub amplitude: Complex64,
    pub reference_amplitude: Complex64,
    pub terms: Vec<TermCheck>,
    pub total: Complex64,
    pub max_relative_deviation: f64,
}

/// Rebuild the density from the amplitude's diagrams by breaking each
/// line in turn, and compare term by term with the explicit formula
/// ([`broken_line_density`] for one particle, [`appendix_density`] terms
/// for two).
#[allow(clippy::too_many_arguments)]
pub fn substitution_check(
    obs: &Observable,
    initial: &[&WaveField],
    finals: &[&WaveField],
    evolver: &Evolver,
    t1: f64,
    t: f64,
    t2: f64,
    opts: DensityOptions,
) -> Result<SubstitutionReport> {
    let n = initial.len();
    if n != finals.len() || !(1..=2).contains(&n) {
        return Err(Error::Unsupported(format!(
            "substitution check for {} initial and {} final states",
            n,
            finals.len()
        )));
    }
    for f in initial {
        check_boundary(f, t1)?;
    }
    for f in finals {
        check_boundary(f, t2)?;
    }
    let grid = *evolver.grid();
    let dx = grid.dx();
    let s = sandwich(evolver, t1, t, t2)?;
    let kets = initial.iter().map(|f| s.early.apply(f)).collect::<Result<Vec<_>>>()?;
    let bras = finals.iter().map(|f| s.late.row_transport(f)).collect::<Result<Vec<_>>>()?;
    // Unbroken lines evaluated at the break time.
    let line = |(f, i): (usize, usize)| raw_overlap(bras[f].values(), kets[i].values(), dx);
    let diagrams = Diagram::fermionic(n);
    let amplitude: Complex64 = diagrams
        .iter()
        .map(|d| d.lines.iter().map(|&l| line(l)).product::<Complex64>() * d.sign)
        .sum();
    let (reference_amplitude, reference): (Complex64, Vec<Vec<Complex64>>) = if n == 1 {
        let d = broken_line_density(obs, finals[0], initial[0], evolver, t1, t, t2, opts)?;
        (d.amplitude(), vec![d.values().iter().map(|v| v * d.amplitude()).collect()])
    } else {
        let pair = FermionPair {
            ia: initial[0],
            ib: initial[1],
            fa: finals[0],
            fb: finals[1],
        };
        let (a, terms) = appendix_terms(obs, &pair, evolver, t1, t, t2, opts)?;
        (a, terms.into_iter().collect())
    };
    let inv = 1.0 / amplitude;
    let ref_inv = 1.0 / reference_amplitude;
    let scale = reference
        .iter()
        .flat_map(|r| r.iter().map(|v| (v * ref_inv).norm()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut terms = Vec::new();
    let mut total = Complex64::default();
    let mut idx = 0;
    for (di, d) in diagrams.iter().enumerate() {
        for (j, &broken) in d.lines.iter().enumerate() {
            let rest: Complex64 = d
                .lines
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &l)| line(l))
                .product();
            let q = local_bilinear(obs, bras[broken.0].values(), kets[broken.1].values(), &grid, opts);
            let term: Vec<Complex64> = q.iter().map(|v| v * rest * d.sign * inv).collect();
            let dev = term
                .iter()
                .zip(&reference[idx])
                .map(|(a, b)| (a - b * ref_inv).norm())
                .fold(0.0, f64::max)
                / scale;
            let integrated = term.iter().sum::<Complex64>() * dx;
            total += integrated;
            terms.push(TermCheck {
                diagram: di,
                broken_line: broken,
                sign: d.sign,
                integrated,
                max_relative_deviation: dev,
            });
            idx += 1;
        }
    }
    let max_relative_deviation = terms.iter().map(|t| t.max_relative_deviation).fold(0.0, f64::max);
    Ok(SubstitutionReport {
        amplitude,
        reference_amplitude,
        terms,
        total,
        max_relative_deviation,
    })
}
