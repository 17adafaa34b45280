//! Two- and three-particle densities on the single-particle grid.
//!
//! Inputs live on the n-fold product grid; every density returned here is
//! a function of one position, obtained by marginalizing the other
//! coordinates against the bilinear `conj(psi_f) Q_x psi_i`.

use num_complex::Complex64;

use crate::densities::{amplitude_floor, check_amplitude, local_bilinear, DensityField, DensityOptions, Observable};
use crate::error::{Error, Result};
use crate::evolution::{Evolver, STEP_ROUNDING};
use crate::fields::{ravel, unravel, ConfigField, SpatialGrid, Symmetry, WaveField, MAX_PARTICLES};
use crate::operators::hamiltonian_apply;

/// Interacting full-space evolution is limited to this many grid points.
pub const MAX_INTERACTING_POINTS: usize = 64;

/// Product state `a(x1) b(x2) ...` of distinguishable particles.
pub fn product(orbitals: &[&WaveField]) -> Result<ConfigField> {
    combine(orbitals, Symmetry::None)
}

/// `(1/sqrt 2)[a(x) b(x') - a(x') b(x)]`.
pub fn antisymmetrize(a: &WaveField, b: &WaveField) -> Result<ConfigField> {
    combine(&[a, b], Symmetry::Antisymmetric)
}

/// `(1/sqrt 2)[a(x) b(x') + a(x') b(x)]`.
pub fn symmetrize(a: &WaveField, b: &WaveField) -> Result<ConfigField> {
    combine(&[a, b], Symmetry::Symmetric)
}

/// (Anti)symmetrized product of up to three orbitals, `1/sqrt(n!)` times
/// the signed sum over permutations.
pub fn combine(orbitals: &[&WaveField], symmetry: Symmetry) -> Result<ConfigField> {
    let particles = orbitals.len();
    if particles == 0 || particles > MAX_PARTICLES {
        return Err(Error::Unsupported(format!("{particles} orbitals")));
    }
    for o in &orbitals[1..] {
        orbitals[0].check_compatible(o)?;
    }
    let grid = *orbitals[0].grid();
    let n = grid.n_points();
    let perms: Vec<(Vec<usize>, f64)> = match symmetry {
        Symmetry::None => vec![((0..particles).collect(), 1.0)],
        _ => permutations(particles)
            .into_iter()
            .map(|(p, parity)| {
                let sign = if symmetry == Symmetry::Antisymmetric && parity { -1.0 } else { 1.0 };
                (p, sign)
            })
            .collect(),
    };
    let scale = 1.0 / (perms.len() as f64).sqrt();
    let mut values = vec![Complex64::default(); n.pow(particles as u32)];
    for (idx, slot) in values.iter_mut().enumerate() {
        let coords = unravel(idx, n, particles);
        let mut acc = Complex64::default();
        for (perm, sign) in &perms {
            // orbital perm[p] sits on coordinate p
            let mut term = Complex64::new(*sign, 0.0);
            for (p, &orb) in perm.iter().enumerate() {
                term *= orbitals[orb].values()[coords[p]];
            }
            acc += term;
        }
        *slot = acc * scale;
    }
    Ok(ConfigField::from_parts_unchecked(
        grid,
        particles,
        values,
        orbitals[0].time(),
        symmetry,
    ))
}

/// All permutations of `0..n` with their parity (`true` = odd).
pub(crate) fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..left.len() {
            let v = left.remove(i);
            prefix.push(v);
            rec(prefix, left, out);
            prefix.pop();
            left.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out.into_iter()
        .map(|p| {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            (p, inversions % 2 == 1)
        })
        .collect()
}

/// `A_n = sum conj(psi_f) psi_i dx^n`.
pub fn amplitude_config(psi_f: &ConfigField, psi_i: &ConfigField) -> Result<Complex64> {
    psi_f.check_compatible(psi_i)?;
    let s: Complex64 = psi_f
        .values()
        .iter()
        .zip(psi_i.values())
        .map(|(f, p)| f.conj() * p)
        .sum();
    Ok(s * psi_i.volume_element())
}

fn checked_amplitude(psi_f: &ConfigField, psi_i: &ConfigField) -> Result<Complex64> {
    let a = amplitude_config(psi_f, psi_i)?;
    check_amplitude(a, amplitude_floor(psi_f.norm_sqr().sqrt(), psi_i.norm_sqr().sqrt()))?;
    Ok(a)
}

/// `sum_{others} conj(psi_f) Q_x psi_i d^{n-1}x` with `Q` acting on the
/// coordinate of particle `which`; not divided by the amplitude.
fn marginal(obs: &Observable, which: usize, psi_f: &ConfigField, psi_i: &ConfigField, opts: DensityOptions) -> Vec<Complex64> {
    let grid = psi_i.grid();
    let n = grid.n_points();
    let particles = psi_i.particles();
    let stride = n.pow((particles - 1 - which) as u32);
    let weight = grid.dx().powi(particles as i32 - 1);
    let mut out = vec![Complex64::default(); n];
    let mut bra = vec![Complex64::default(); n];
    let mut ket = vec![Complex64::default(); n];
    for base in 0..n.pow(particles as u32) {
        if unravel(base, n, particles)[which] != 0 {
            continue;
        }
        for x in 0..n {
            bra[x] = psi_f.values()[base + x * stride];
            ket[x] = psi_i.values()[base + x * stride];
        }
        for (o, v) in out.iter_mut().zip(local_bilinear(obs, &bra, &ket, grid, opts)) {
            *o += v * weight;
        }
    }
    out
}

fn require(psi: &ConfigField, allowed: &[Symmetry], what: &str) -> Result<()> {
    if allowed.contains(&psi.symmetry()) {
        Ok(())
    } else {
        Err(Error::SymmetryModeMismatch(format!(
            "{what} needs {allowed:?}, got {:?}",
            psi.symmetry()
        )))
    }
}

/// Density of particle `which` (0-based) for distinguishable particles.
pub fn density_particle(
    which: usize,
    obs: &Observable,
    psi_f: &ConfigField,
    psi_i: &ConfigField,
    opts: DensityOptions,
) -> Result<DensityField> {
    require(psi_i, &[Symmetry::None], "per-particle density")?;
    require(psi_f, &[Symmetry::None], "per-particle density")?;
    if which >= psi_i.particles() {
        return Err(Error::InvalidConfig(format!(
            "particle {which} of {}",
            psi_i.particles()
        )));
    }
    let a = checked_amplitude(psi_f, psi_i)?;
    let inv = 1.0 / a;
    let values = marginal(obs, which, psi_f, psi_i, opts)
        .into_iter()
        .map(|v| v * inv)
        .collect();
    Ok(DensityField::new(*psi_i.grid(), values, obs.name(), psi_i.time(), a))
}

/// Sum of the per-particle densities; `observables[p]` is used for
/// particle `p` (so particles may carry different masses or charges).
pub fn density_total_distinguishable(
    observables: &[Observable],
    psi_f: &ConfigField,
    psi_i: &ConfigField,
    opts: DensityOptions,
) -> Result<DensityField> {
    if observables.len() != psi_i.particles() {
        return Err(Error::InvalidConfig(format!(
            "{} observables for {} particles",
            observables.len(),
            psi_i.particles()
        )));
    }
    let mut acc = density_particle(0, &observables[0], psi_f, psi_i, opts)?;
    for (p, obs) in observables.iter().enumerate().skip(1) {
        acc = acc.sum_with(&density_particle(p, obs, psi_f, psi_i, opts)?)?;
    }
    Ok(acc)
}

/// Overall density of identical particles: `n/A` times the marginal on the
/// first coordinate.
pub fn density_identical(
    obs: &Observable,
    psi_f: &ConfigField,
    psi_i: &ConfigField,
    opts: DensityOptions,
) -> Result<DensityField> {
    require(psi_i, &[Symmetry::Symmetric, Symmetry::Antisymmetric], "identical-particle density")?;
    if psi_f.symmetry() != psi_i.symmetry() {
        return Err(Error::SymmetryModeMismatch(format!(
            "initial is {:?}, final is {:?}",
            psi_i.symmetry(),
            psi_f.symmetry()
        )));
    }
    let a = checked_amplitude(psi_f, psi_i)?;
    let factor = psi_i.particles() as f64 / a;
    let values = marginal(obs, 0, psi_f, psi_i, opts)
        .into_iter()
        .map(|v| v * factor)
        .collect();
    Ok(DensityField::new(*psi_i.grid(), values, obs.name(), psi_i.time(), a))
}

/// Non-interacting evolution: the single-particle step operator applied
/// along every axis of the product grid.
pub fn evolve_config(field: &ConfigField, evolver: &Evolver, t_target: f64) -> Result<ConfigField> {
    if field.grid() != evolver.grid() {
        return Err(Error::GridMismatch);
    }
    let steps = evolver.steps_between(field.time(), t_target)?;
    let sign = steps.signum() as f64;
    let dt = evolver.dt();
    let n = field.grid().n_points();
    let particles = field.particles();
    let t0 = field.time();
    let mut values = field.values().to_vec();
    let mut line = vec![Complex64::default(); n];
    for j in 0..steps.unsigned_abs() as usize {
        let ta = t0 + sign * j as f64 * dt;
        let tb = t0 + sign * (j + 1) as f64 * dt;
        let op = evolver.operator_for_step(ta, tb)?;
        for axis in 0..particles {
            let stride = n.pow((particles - 1 - axis) as u32);
            for base in 0..values.len() {
                if unravel(base, n, particles)[axis] != 0 {
                    continue;
                }
                for x in 0..n {
                    line[x] = values[base + x * stride];
                }
                let out = if sign > 0.0 { op.apply(&line) } else { op.apply_adjoint(&line) };
                for x in 0..n {
                    values[base + x * stride] = out[x];
                }
            }
        }
    }
    Ok(field.with_values(values, if steps == 0 { t0 } else { t_target }))
}

/// Crank-Nicolson in the full two-particle space with a pair potential
/// `w(x1, x2)` added on the diagonal. The implicit system is solved with
/// conjugate gradients on the normal equations.
#[derive(Debug, Clone)]
pub struct InteractingPair {
    grid: SpatialGrid,
    external: Vec<f64>,
    pair: Vec<f64>,
    dt: f64,
}

impl InteractingPair {
    pub fn new(grid: &SpatialGrid, external: Vec<f64>, pair: Vec<f64>, dt: f64) -> Result<Self> {
        let n = grid.n_points();
        if n > MAX_INTERACTING_POINTS {
            return Err(Error::Unsupported(format!(
                "interacting evolution on {n} > {MAX_INTERACTING_POINTS} points"
            )));
        }
        if external.len() != n || pair.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: pair.len(),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {dt}")));
        }
        Ok(Self {
            grid: *grid,
            external,
            pair,
            dt,
        })
    }

    /// `pair(x1, x2) = f(|x1 - x2|)`.
    pub fn with_distance_potential(grid: &SpatialGrid, external: Vec<f64>, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let xs = grid.coordinates();
        let pair = xs
            .iter()
            .flat_map(|a| xs.iter().map(move |b| (a, b)))
            .map(|(a, b)| f((a - b).abs()))
            .collect();
        Self::new(grid, external, pair, dt)
    }

    fn hamiltonian(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n_points();
        let mut out: Vec<Complex64> = v.iter().zip(&self.pair).map(|(a, w)| a * *w).collect();
        let mut line = vec![Complex64::default(); n];
        for axis in 0..2 {
            let stride = if axis == 0 { n } else { 1 };
            for other in 0..n {
                let base = if axis == 0 { other } else { other * n };
                for x in 0..n {
                    line[x] = v[base + x * stride];
                }
                let h = hamiltonian_apply(&line, &self.grid, &self.external, 1.0);
                for x in 0..n {
                    out[base + x * stride] += h[x];
                }
            }
        }
        out
    }

    fn cayley_side(&self, v: &[Complex64], sign: f64) -> Vec<Complex64> {
        let s = Complex64::new(0.0, sign * 0.5 * self.dt);
        self.hamiltonian(v).into_iter().zip(v).map(|(h, x)| x + h * s).collect()
    }

    /// One step forward (`backward = false`) or backward.
    pub fn step(&self, field: &ConfigField, backward: bool) -> Result<ConfigField> {
        if field.particles() != 2 || field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        // forward: (I + i tau H) x = (I - i tau H) v; backward swaps the signs
        let s = if backward { -1.0 } else { 1.0 };
        let rhs = self.cayley_side(field.values(), -s);
        let x = self.solve(&rhs, s)?;
        let t = field.time() + s * self.dt;
        Ok(field.with_values(x, t))
    }

    pub fn evolve(&self, field: &ConfigField, t_target: f64) -> Result<ConfigField> {
        let raw = (t_target - field.time()) / self.dt;
        let n = raw.round();
        if (raw - n).abs() > STEP_ROUNDING {
            return Err(Error::UnreachableTime {
                from: field.time(),
                target: t_target,
                dt: self.dt,
            });
        }
        let mut f = field.clone();
        for _ in 0..n.abs() as usize {
            f = self.step(&f, n < 0.0)?;
        }
        Ok(f.with_values(f.values().to_vec(), if n == 0.0 { field.time() } else { t_target }))
    }

    /// Solve `(I + i s tau H) x = b` by CG on `(I + tau^2 H^2) x = (I - i s tau H) b`.
    fn solve(&self, b: &[Complex64], s: f64) -> Result<Vec<Complex64>> {
        let tau = 0.5 * self.dt;
        let normal = |v: &[Complex64]| -> Vec<Complex64> {
            let hv = self.hamiltonian(v);
            let hhv = self.hamiltonian(&hv);
            v.iter().zip(&hhv).map(|(a, c)| a + c * (tau * tau)).collect()
        };
        let dot = |a: &[Complex64], c: &[Complex64]| -> Complex64 { a.iter().zip(c).map(|(x, y)| x.conj() * y).sum() };
        let rhs = self.cayley_side(b, -s);
        let mut x = b.to_vec();
        let ax = normal(&x);
        let mut r: Vec<Complex64> = rhs.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let mut p = r.clone();
        let mut rr = dot(&r, &r).re;
        let target = 1e-28 * dot(&rhs, &rhs).re.max(f64::MIN_POSITIVE);
        for _ in 0..(10 * b.len()).max(100) {
            if rr <= target {
                return Ok(x);
            }
            let ap = normal(&p);
            let alpha = rr / dot(&p, &ap).re;
            for i in 0..x.len() {
                x[i] += p[i] * alpha;
                r[i] -= ap[i] * alpha;
            }
            let rr_new = dot(&r, &r).re;
            let beta = rr_new / rr;
            for i in 0..p.len() {
                p[i] = r[i] + p[i] * beta;
            }
            rr = rr_new;
        }
        if rr <= target * 1e4 {
            Ok(x)
        } else {
            Err(Error::SingularSolve)
        }
    }
}

/// `ravel` re-export for callers building their own product-grid indices.
pub fn flat_index(coords: &[usize], n_points: usize) -> usize {
    ravel(coords, n_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{density, total};
    use crate::evolution::PotentialSpec;
    use crate::fields::{inner_product, make_gaussian, random_field};
    use nalgebra::DMatrix;

    fn grid() -> SpatialGrid {
        SpatialGrid::hard_wall(64, -10.0, 10.0).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Orthonormal pair via Gram-Schmidt.
    fn orthonormal(g: &SpatialGrid, s1: u64, s2: u64) -> (WaveField, WaveField) {
        let a = random_field(g, s1, 0.0);
        let b = random_field(g, s2, 0.0);
        let proj = inner_product(&a, &b).unwrap();
        let b = b.add_scaled(-proj, &a).unwrap().normalized().unwrap();
        (a, b)
    }

    #[test]
    fn antisymmetrize_examples() {
        let g = grid();
        let (a, b) = orthonormal(&g, 1, 2);
        let same = antisymmetrize(&a, &a).unwrap();
        assert!(same.values().iter().all(|v| v.norm() == 0.0));
        let psi = antisymmetrize(&a, &b).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let n = g.n_points();
        for j in 0..n {
            for k in 0..n {
                assert_eq!(psi.values()[j * n + k], -psi.values()[k * n + j]);
            }
        }
        assert_eq!(psi.symmetry_violation(), 0.0);
        let sym = symmetrize(&a, &b).unwrap();
        assert!((sym.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_density_factorizes() {
        let g = grid();
        let a = make_gaussian(&g, -1.0, 1.0, 0.5, 0.0).unwrap();
        let b = make_gaussian(&g, 2.0, 0.8, -0.3, 0.0).unwrap();
        let a2 = make_gaussian(&g, -0.5, 1.2, 0.1, 0.0).unwrap();
        let b2 = make_gaussian(&g, 1.5, 1.0, 0.0, 0.0).unwrap();
        let psi_i = product(&[&a, &b]).unwrap();
        let psi_f = product(&[&a2, &b2]).unwrap();
        for obs in [Observable::Mass(1.0), Observable::Momentum] {
            let q1 = density_particle(0, &obs, &psi_f, &psi_i, Default::default()).unwrap();
            let single = density(&obs, &a2, &a).unwrap();
            assert!(q1.l2_distance(&single).unwrap() < 1e-12, "{}", obs.name());
            let q2 = density_particle(1, &obs, &psi_f, &psi_i, Default::default()).unwrap();
            let single2 = density(&obs, &b2, &b).unwrap();
            assert!(q2.l2_distance(&single2).unwrap() < 1e-12);
            let sum = density_total_distinguishable(&[obs.clone(), obs.clone()], &psi_f, &psi_i, Default::default()).unwrap();
            assert_eq!(sum.values(), q1.sum_with(&q2).unwrap().values());
        }
        let q = density_particle(0, &Observable::Mass(2.5), &psi_f, &psi_i, Default::default()).unwrap();
        assert!((total(&q) - c(2.5)).norm() < 1e-12);
        let both = density_total_distinguishable(
            &[Observable::Mass(1.0), Observable::Mass(200.0)],
            &psi_f,
            &psi_i,
            Default::default(),
        )
        .unwrap();
        assert!((total(&both) - c(201.0)).norm() < 1e-10);
    }

    #[test]
    fn entangled_momentum_density_matches_direct_summation() {
        let g = grid();
        let (a, b) = orthonormal(&g, 3, 4);
        let n = g.n_points();
        let dx = g.dx();
        let psi_i = ConfigField::new(
            g,
            2,
            (0..n * n)
                .map(|idx| {
                    let (j, k) = (idx / n, idx % n);
                    (a.values()[j] * b.values()[k] + b.values()[j] * a.values()[k]) / 2f64.sqrt()
                })
                .collect(),
            0.0,
            Symmetry::None,
        )
        .unwrap();
        let psi_f = product(&[&a, &b]).unwrap();
        let got = density_particle(0, &Observable::Momentum, &psi_f, &psi_i, Default::default()).unwrap();

        // Oracle: explicit double loop with the centered difference written
        // out, no shared helpers.
        let at = |v: &[Complex64], j: isize, k: usize| -> Complex64 {
            if j < 0 || j >= n as isize { Complex64::default() } else { v[j as usize * n + k] }
        };
        let mut amp = Complex64::default();
        for idx in 0..n * n {
            amp += psi_f.values()[idx].conj() * psi_i.values()[idx] * dx * dx;
        }
        for j in 0..n {
            let mut acc = Complex64::default();
            for k in 0..n {
                let f = psi_f.values();
                let p = psi_i.values();
                let dp = (at(p, j as isize + 1, k) - at(p, j as isize - 1, k)) / (2.0 * dx);
                let df = (at(f, j as isize + 1, k) - at(f, j as isize - 1, k)) / (2.0 * dx);
                acc += (f[j * n + k].conj() * dp - df.conj() * p[j * n + k]) * Complex64::new(0.0, -0.5) * dx;
            }
            let expected = acc / amp;
            assert!((got.values()[j] - expected).norm() < 1e-10 * expected.norm().max(1.0));
        }
    }

    #[test]
    fn identical_pair_mass_totals_two_m() {
        let g = grid();
        let (a, b) = orthonormal(&g, 5, 6);
        let (c2, d2) = orthonormal(&g, 7, 8);
        let psi_i = antisymmetrize(&a, &b).unwrap();
        let psi_f = antisymmetrize(&c2, &d2).unwrap();
        let d = density_identical(&Observable::Mass(1.7), &psi_f, &psi_i, Default::default()).unwrap();
        assert!((total(&d) - c(3.4)).norm() < 1e-10);
        assert!(matches!(
            density_particle(0, &Observable::Mass(1.0), &psi_f, &psi_i, Default::default()),
            Err(Error::SymmetryModeMismatch(_))
        ));
        let sym = symmetrize(&c2, &d2).unwrap();
        assert!(matches!(
            density_identical(&Observable::Mass(1.0), &sym, &psi_i, Default::default()),
            Err(Error::SymmetryModeMismatch(_))
        ));
    }

    #[test]
    fn three_identical_particles_total_three_m() {
        let g = SpatialGrid::hard_wall(20, -6.0, 6.0).unwrap();
        let orbs: Vec<WaveField> = (0..3).map(|i| random_field(&g, 30 + i, 0.0)).collect();
        let fin: Vec<WaveField> = (0..3).map(|i| random_field(&g, 40 + i, 0.0)).collect();
        for sym in [Symmetry::Antisymmetric, Symmetry::Symmetric] {
            let psi_i = combine(&[&orbs[0], &orbs[1], &orbs[2]], sym).unwrap();
            let psi_f = combine(&[&fin[0], &fin[1], &fin[2]], sym).unwrap();
            assert!(psi_i.symmetry_violation() < 1e-14);
            let d = density_identical(&Observable::Mass(1.0), &psi_f, &psi_i, Default::default()).unwrap();
            assert_eq!(d.values().len(), g.n_points());
            assert!((total(&d) - c(3.0)).norm() < 1e-10, "{sym:?}");
        }
        let pauli = combine(&[&orbs[0], &orbs[1], &orbs[0]], Symmetry::Antisymmetric).unwrap();
        assert!(pauli.values().iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn exchange_term_vanishes_for_separated_packets() {
        let g = SpatialGrid::hard_wall(80, -16.0, 16.0).unwrap();
        let a = make_gaussian(&g, -8.0, 1.0, 0.3, 0.0).unwrap();
        let b = make_gaussian(&g, 8.0, 1.0, -0.2, 0.0).unwrap();
        let fa = make_gaussian(&g, -7.5, 1.1, 0.0, 0.0).unwrap();
        let fb = make_gaussian(&g, 7.5, 0.9, 0.0, 0.0).unwrap();
        for obs in [Observable::Mass(1.0), Observable::Momentum] {
            let anti = density_identical(
                &obs,
                &antisymmetrize(&fa, &fb).unwrap(),
                &antisymmetrize(&a, &b).unwrap(),
                Default::default(),
            )
            .unwrap();
            let sym = density_identical(
                &obs,
                &symmetrize(&fa, &fb).unwrap(),
                &symmetrize(&a, &b).unwrap(),
                Default::default(),
            )
            .unwrap();
            assert!(anti.l2_distance(&sym).unwrap() < 1e-10, "{}", obs.name());
        }
    }

    #[test]
    fn kronecker_evolution_preserves_two_particle_amplitude() {
        let g = SpatialGrid::hard_wall(48, -8.0, 8.0).unwrap();
        let pot = PotentialSpec::harmonic(&g, 0.5, 0.0).unwrap();
        let evo = Evolver::new(&g, &pot, 0.01).unwrap();
        let psi_i = antisymmetrize(
            &make_gaussian(&g, -1.0, 1.0, 0.5, 0.0).unwrap(),
            &make_gaussian(&g, 1.5, 0.8, 0.0, 0.0).unwrap(),
        )
        .unwrap();
        let psi_f = antisymmetrize(
            &make_gaussian(&g, -0.5, 1.0, 0.0, 0.0).unwrap(),
            &make_gaussian(&g, 1.0, 1.0, -0.4, 0.0).unwrap(),
        )
        .unwrap();
        let a0 = amplitude_config(&psi_f, &psi_i).unwrap();
        let ei = evolve_config(&psi_i, &evo, 10.0).unwrap();
        let ef = evolve_config(&psi_f, &evo, 10.0).unwrap();
        assert!((amplitude_config(&ef, &ei).unwrap() - a0).norm() < 1e-10);
        assert!(ei.symmetry_violation() < 1e-12);
        // Kronecker evolution of a product equals the product of evolutions.
        let a = make_gaussian(&g, -1.0, 1.0, 0.5, 0.0).unwrap();
        let b = make_gaussian(&g, 1.5, 0.8, 0.0, 0.0).unwrap();
        let direct = evolve_config(&antisymmetrize(&a, &b).unwrap(), &evo, 0.5).unwrap();
        let via = antisymmetrize(&evo.evolve(&a, 0.5).unwrap(), &evo.evolve(&b, 0.5).unwrap()).unwrap();
        let err = direct
            .values()
            .iter()
            .zip(via.values())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn interacting_pair_smoke_test() {
        let g = SpatialGrid::hard_wall(40, -7.0, 7.0).unwrap();
        let ext: Vec<f64> = g.coordinates().iter().map(|x| 0.5 * x * x).collect();
        let pair = InteractingPair::with_distance_potential(&g, ext.clone(), 0.02, |r| 1.0 / (1.0 + r * r)).unwrap();
        let a = make_gaussian(&g, -1.0, 0.8, 0.0, 0.0).unwrap();
        let b = make_gaussian(&g, 1.0, 0.8, 0.0, 0.0).unwrap();
        let psi = antisymmetrize(&a, &b).unwrap();
        let fin = antisymmetrize(&make_gaussian(&g, -0.8, 0.9, 0.0, 0.0).unwrap(), &b).unwrap();
        let a0 = amplitude_config(&fin, &psi).unwrap();
        let out = pair.evolve(&psi, 0.4).unwrap();
        let fout = pair.evolve(&fin, 0.4).unwrap();
        assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-10);
        assert!((amplitude_config(&fout, &out).unwrap() - a0).norm() < 1e-10);
        let back = pair.evolve(&out, 0.0).unwrap();
        let err = back.values().iter().zip(psi.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
        // With zero pair potential it agrees with the Kronecker route up to
        // the O(dt^2) gap between the Cayley transform of H1 + H2 and the
        // product of the single-axis Cayley transforms.
        let free_pair = InteractingPair::new(&g, ext.clone(), vec![0.0; 40 * 40], 0.02).unwrap();
        let evo = Evolver::new(&g, &PotentialSpec::stationary(&g, ext).unwrap(), 0.02).unwrap();
        let x = free_pair.evolve(&psi, 0.2).unwrap();
        let y = evolve_config(&psi, &evo, 0.2).unwrap();
        let err = x.values().iter().zip(y.values()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        assert!(InteractingPair::new(&SpatialGrid::hard_wall(65, 0.0, 1.0).unwrap(), vec![0.0; 65], vec![0.0; 65 * 65], 0.1).is_err());
    }

    #[test]
    fn custom_observable_marginal_uses_matrix() {
        let g = SpatialGrid::hard_wall(12, -3.0, 3.0).unwrap();
        let a = random_field(&g, 1, 0.0);
        let b = random_field(&g, 2, 0.0);
        let psi = product(&[&a, &b]).unwrap();
        let m = DMatrix::<Complex64>::identity(12, 12) * c(2.0);
        let d = density_particle(0, &Observable::Custom(m), &psi, &psi, Default::default()).unwrap();
        assert!((total(&d) - c(2.0)).norm() < 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]

        #[test]
        fn relabelling_fermions_flips_amplitude_not_density(seed in 0u64..10_000) {
            let g = SpatialGrid::hard_wall(12, -3.0, 3.0).unwrap();
            let [ia, ib, fa, fb] = [0, 1, 2, 3].map(|k| random_field(&g, 4 * seed + k, 0.0));
            let psi_i = antisymmetrize(&ia, &ib).unwrap();
            let (f_ab, f_ba) = (antisymmetrize(&fa, &fb).unwrap(), antisymmetrize(&fb, &fa).unwrap());
            let (a, b) = (amplitude_config(&f_ab, &psi_i).unwrap(), amplitude_config(&f_ba, &psi_i).unwrap());
            proptest::prop_assert!((a + b).norm() < 1e-12 * a.norm().max(1.0));
            let d1 = density_identical(&Observable::Momentum, &f_ab, &psi_i, Default::default()).unwrap();
            let d2 = density_identical(&Observable::Momentum, &f_ba, &psi_i, Default::default()).unwrap();
            proptest::prop_assert!(d1.l2_distance(&d2).unwrap() < 1e-12 * d1.max_abs().max(1.0));
        }
    }
}
