//! Conservation checks for mixed pairs of solutions.
//!
//! Everything here works on snapshot sequences: the initial field stepped
//! forward and the final field stepped backward, sampled at the same
//! times. Time derivatives are centered differences of neighbouring
//! snapshots.

use num_complex::Complex64;
use serde::Serialize;

use crate::densities::{amplitude_floor, check_amplitude};
use crate::error::{Error, Result};
use crate::evolution::{Channel, PotentialSpec};
use crate::fields::{raw_inner, SpatialGrid, WaveField};
use crate::operators::{gradient_product, hamiltonian_apply};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualQuantity {
    SchrodingerI,
    SchrodingerF,
    Continuity,
    AmplitudeDrift,
    EnergyDrift,
}

/// One check over a pair of trajectories.
///
/// For the field equations and continuity, `per_time[k]` is the largest
/// pointwise residual at snapshot `k` (zero at the two ends, where no
/// centered difference exists). For the drifts it is the change since the
/// previous snapshot, so a jump shows up at the index where it happens.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub quantity: ResidualQuantity,
    pub max_abs: f64,
    pub l2: f64,
    pub worst_index: usize,
    pub worst_time: f64,
    pub per_time: Vec<f64>,
    pub n_points: usize,
    pub dx: f64,
    pub dt: f64,
    pub snapshots: usize,
}

impl ResidualReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// One JSON object per line.
pub fn to_json_lines(reports: &[ResidualReport]) -> String {
    reports.iter().map(|r| r.to_json_line() + "\n").collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct LagrangianSlice {
    pub time: f64,
    pub values: Vec<Complex64>,
}

/// Shared grid, snapshot spacing and time list of one or two trajectories.
struct Layout {
    grid: SpatialGrid,
    times: Vec<f64>,
    dt: f64,
}

fn layout(a: &[WaveField], b: Option<&[WaveField]>) -> Result<Layout> {
    if a.len() < 3 {
        return Err(Error::MissingSnapshots { needed: 3, got: a.len() });
    }
    let grid = *a[0].grid();
    let times: Vec<f64> = a.iter().map(|f| f.time()).collect();
    let dt = times[1] - times[0];
    if dt == 0.0 {
        return Err(Error::InvalidConfig("repeated snapshot time".into()));
    }
    let slack = 1e-9 * dt.abs();
    for (k, f) in a.iter().enumerate() {
        if f.grid() != &grid {
            return Err(Error::GridMismatch);
        }
        if (f.time() - (times[0] + k as f64 * dt)).abs() > slack {
            return Err(Error::InvalidConfig("snapshots are not evenly spaced".into()));
        }
    }
    if let Some(b) = b {
        if b.len() != a.len() {
            return Err(Error::MissingSnapshots { needed: a.len(), got: b.len() });
        }
        for (x, y) in a.iter().zip(b) {
            if y.grid() != &grid {
                return Err(Error::GridMismatch);
            }
            if (x.time() - y.time()).abs() > slack {
                return Err(Error::TimeMismatch {
                    left: x.time(),
                    right: y.time(),
                });
            }
        }
    }
    Ok(Layout { grid, times, dt })
}

fn centered(prev: &WaveField, next: &WaveField, span: f64) -> Vec<Complex64> {
    prev.values()
        .iter()
        .zip(next.values())
        .map(|(a, b)| (b - a) / span)
        .collect()
}

/// Mixed Lagrangian density at every interior snapshot:
/// `-(1/2) grad f* . grad psi + (i/2)(f* dpsi/dt - df*/dt psi) - V f* psi`.
pub fn lagrangian_density(
    traj_f: &[WaveField],
    traj_i: &[WaveField],
    potential: &PotentialSpec,
    channel: Option<Channel>,
) -> Result<Vec<LagrangianSlice>> {
    let lay = layout(traj_i, Some(traj_f))?;
    let half_i = Complex64::new(0.0, 0.5);
    (1..traj_i.len() - 1)
        .map(|k| {
            let t = lay.times[k];
            let v = potential.values_at(t, channel)?;
            let f = traj_f[k].values();
            let p = traj_i[k].values();
            let dp = centered(&traj_i[k - 1], &traj_i[k + 1], 2.0 * lay.dt);
            let df = centered(&traj_f[k - 1], &traj_f[k + 1], 2.0 * lay.dt);
            let grad = gradient_product(f, p, &lay.grid);
            let values = (0..f.len())
                .map(|x| {
                    -0.5 * grad[x] + half_i * (f[x].conj() * dp[x] - df[x].conj() * p[x]) - f[x].conj() * p[x] * v[x]
                })
                .collect();
            Ok(LagrangianSlice { time: t, values })
        })
        .collect()
}

fn summarize(quantity: ResidualQuantity, lay: &Layout, per_node: Vec<Vec<f64>>, snapshots: usize) -> ResidualReport {
    // per_node[k] holds |residual| at every node for interior snapshot k+1
    let mut per_time = vec![0.0; snapshots];
    let mut sq = 0.0;
    for (k, row) in per_node.iter().enumerate() {
        per_time[k + 1] = row.iter().copied().fold(0.0, f64::max);
        sq += row.iter().map(|r| r * r).sum::<f64>() * lay.grid.dx();
    }
    let (worst_index, max_abs) = per_time
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    ResidualReport {
        quantity,
        max_abs,
        l2: (sq / per_node.len().max(1) as f64).sqrt(),
        worst_index,
        worst_time: lay.times[worst_index],
        per_time,
        n_points: lay.grid.n_points(),
        dx: lay.grid.dx(),
        dt: lay.dt.abs(),
        snapshots,
    }
}

fn schrodinger_residual(
    traj: &[WaveField],
    lay: &Layout,
    potential: &PotentialSpec,
    channel: Option<Channel>,
    quantity: ResidualQuantity,
) -> Result<ResidualReport> {
    let mut rows = Vec::with_capacity(traj.len() - 2);
    for k in 1..traj.len() - 1 {
        let v = potential.values_at(lay.times[k], channel)?;
        let h = hamiltonian_apply(traj[k].values(), &lay.grid, &v, 1.0);
        let d = centered(&traj[k - 1], &traj[k + 1], 2.0 * lay.dt);
        rows.push(
            d.iter()
                .zip(&h)
                .map(|(dp, hp)| (Complex64::i() * dp - hp).norm())
                .collect(),
        );
    }
    Ok(summarize(quantity, lay, rows, traj.len()))
}

/// Residuals of `i dpsi/dt = H psi` along both trajectories.
pub fn field_equation_residuals(
    traj_i: &[WaveField],
    traj_f: &[WaveField],
    potential: &PotentialSpec,
    channel: Option<Channel>,
) -> Result<[ResidualReport; 2]> {
    let lay = layout(traj_i, Some(traj_f))?;
    Ok([
        schrodinger_residual(traj_i, &lay, potential, channel, ResidualQuantity::SchrodingerI)?,
        schrodinger_residual(traj_f, &lay, potential, channel, ResidualQuantity::SchrodingerF)?,
    ])
}

/// Link current `(1/2i)(f*_k psi_{k+1} - f*_{k+1} psi_k)/dx` between node
/// `k` and its right neighbour. With the compact second difference this
/// is the current for which the semi-discrete continuity equation holds
/// exactly, so the residual measures only the time discretization.
pub fn link_current(bra: &[Complex64], ket: &[Complex64], grid: &SpatialGrid) -> Vec<Complex64> {
    let factor = Complex64::new(0.0, -0.5 / grid.dx());
    (0..grid.n_points())
        .map(|k| match grid.neighbour(k, 1) {
            Some(r) => (bra[k].conj() * ket[r] - bra[r].conj() * ket[k]) * factor,
            None => Complex64::default(),
        })
        .collect()
}

fn pair_amplitude(f: &WaveField, p: &WaveField) -> Complex64 {
    raw_inner(f.values(), p.values()) * f.grid().dx()
}

fn energy_total(f: &WaveField, p: &WaveField, v: &[f64]) -> Complex64 {
    let grid = f.grid();
    let kin: Complex64 = gradient_product(f.values(), p.values(), grid).into_iter().sum();
    let pot: Complex64 = f
        .values()
        .iter()
        .zip(p.values())
        .zip(v)
        .map(|((a, b), w)| a.conj() * b * *w)
        .sum();
    (0.5 * kin + pot) * grid.dx()
}

fn drift_report(quantity: ResidualQuantity, lay: &Layout, series: &[Complex64]) -> ResidualReport {
    let mut per_time = vec![0.0; series.len()];
    for k in 1..series.len() {
        per_time[k] = (series[k] - series[k - 1]).norm();
    }
    let from_start: Vec<f64> = series.iter().map(|s| (s - series[0]).norm()).collect();
    let (worst_index, max_abs) = from_start
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    ResidualReport {
        quantity,
        max_abs,
        l2: (from_start.iter().map(|x| x * x).sum::<f64>() / series.len() as f64).sqrt(),
        worst_index,
        worst_time: lay.times[worst_index],
        per_time,
        n_points: lay.grid.n_points(),
        dx: lay.grid.dx(),
        dt: lay.dt.abs(),
        snapshots: series.len(),
    }
}

/// Continuity of `rho = e f* psi / A` with the link current, drift of the
/// amplitude, and drift of the total energy `<f|H|psi>/A`.
pub fn noether_checks(
    traj_i: &[WaveField],
    traj_f: &[WaveField],
    potential: &PotentialSpec,
    channel: Option<Channel>,
    charge: f64,
) -> Result<[ResidualReport; 3]> {
    let lay = layout(traj_i, Some(traj_f))?;
    let a0 = pair_amplitude(&traj_f[0], &traj_i[0]);
    check_amplitude(a0, amplitude_floor(traj_f[0].norm(), traj_i[0].norm()))?;
    let scale = charge / a0;
    let rho: Vec<Vec<Complex64>> = traj_f
        .iter()
        .zip(traj_i)
        .map(|(f, p)| {
            f.values()
                .iter()
                .zip(p.values())
                .map(|(a, b)| a.conj() * b * scale)
                .collect()
        })
        .collect();
    let dx = lay.grid.dx();
    let mut rows = Vec::with_capacity(traj_i.len() - 2);
    for k in 1..traj_i.len() - 1 {
        let j = link_current(traj_f[k].values(), traj_i[k].values(), &lay.grid);
        let row = (0..lay.grid.n_points())
            .map(|x| {
                let left = lay.grid.neighbour(x, -1).map_or(Complex64::default(), |l| j[l]);
                let div = (j[x] - left) * scale / dx;
                let drho = (rho[k + 1][x] - rho[k - 1][x]) / (2.0 * lay.dt);
                (drho + div).norm()
            })
            .collect();
        rows.push(row);
    }
    let continuity = summarize(ResidualQuantity::Continuity, &lay, rows, traj_i.len());

    let amps: Vec<Complex64> = traj_f.iter().zip(traj_i).map(|(f, p)| pair_amplitude(f, p)).collect();
    let energies = traj_f
        .iter()
        .zip(traj_i)
        .zip(&amps)
        .zip(&lay.times)
        .map(|(((f, p), a), &t)| Ok(energy_total(f, p, &potential.values_at(t, channel)?) / a))
        .collect::<Result<Vec<_>>>()?;
    Ok([
        continuity,
        drift_report(ResidualQuantity::AmplitudeDrift, &lay, &amps),
        drift_report(ResidualQuantity::EnergyDrift, &lay, &energies),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::Evolver;
    use crate::fields::{make_gaussian, make_plane_wave, mode_wavenumber};
    use crate::operators::hamiltonian_matrix;
    use nalgebra::SymmetricEigen;

    fn joint(evo: &Evolver, psi_i: &WaveField, psi_f: &WaveField) -> (Vec<WaveField>, Vec<WaveField>) {
        let fwd = evo.trajectory(psi_i, psi_f.time(), 1).unwrap();
        let mut bwd = evo.trajectory(psi_f, psi_i.time(), 1).unwrap();
        bwd.reverse();
        (fwd, bwd)
    }

    /// Discrete ground state and its energy, from dense diagonalization.
    fn ground_state(g: &SpatialGrid, v: &[f64]) -> (Vec<Complex64>, f64) {
        let eig = SymmetricEigen::new(hamiltonian_matrix(g, v));
        let (i, e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, e)| (i, *e))
            .unwrap();
        let norm = (eig.eigenvectors.column(i).norm_squared() * g.dx()).sqrt();
        (eig.eigenvectors.column(i).iter().map(|x| Complex64::new(x / norm, 0.0)).collect(), e)
    }

    #[test]
    fn lagrangian_vanishes_on_shell_for_eigenstate() {
        let g = SpatialGrid::hard_wall(96, -8.0, 8.0).unwrap();
        let pot = PotentialSpec::harmonic(&g, 1.0, 0.0).unwrap();
        let (phi, e) = ground_state(&g, &pot.values_at(0.0, None).unwrap());
        let dt = 1e-3;
        let traj: Vec<WaveField> = (0..3)
            .map(|k| {
                let t = k as f64 * dt;
                let ph = Complex64::from_polar(1.0, -e * t);
                WaveField::new(g, phi.iter().map(|v| v * ph).collect(), t).unwrap()
            })
            .collect();
        let l = lagrangian_density(&traj, &traj, &pot, None).unwrap();
        assert_eq!(l.len(), 1);
        let integral: Complex64 = l[0].values.iter().sum::<Complex64>() * g.dx();
        assert!(integral.norm() < e.powi(3) * dt * dt, "{integral}");
        assert!(matches!(
            lagrangian_density(&traj[..2], &traj[..2], &pot, None),
            Err(Error::MissingSnapshots { .. })
        ));
    }

    #[test]
    fn lagrangian_of_plane_waves() {
        let g = SpatialGrid::periodic(64, 0.0, 8.0).unwrap();
        let pot = PotentialSpec::free(&g);
        let evo = Evolver::new(&g, &pot, 0.001).unwrap();
        let a = make_plane_wave(&g, 3, 0.0).unwrap();
        let traj = evo.trajectory(&a, 0.002, 1).unwrap();
        let l = lagrangian_density(&traj, &traj, &pot, None).unwrap();
        assert!(l[0].values.iter().all(|v| v.norm() < 1e-5));

        let b = make_plane_wave(&g, 5, 0.0).unwrap();
        let tb = evo.trajectory(&b, 0.002, 1).unwrap();
        let l = lagrangian_density(&tb, &traj, &pot, None).unwrap();
        // Oracle: conj(e^{i k2 x}) e^{i k1 x} oscillates with k1 - k2.
        let dk = mode_wavenumber(&g, 3) - mode_wavenumber(&g, 5);
        let xs = g.coordinates();
        let ratio: Vec<Complex64> = l[0]
            .values
            .iter()
            .zip(&xs)
            .map(|(v, x)| v / Complex64::from_polar(1.0, dk * x))
            .collect();
        assert!(ratio[0].norm() > 1e-3);
        assert!(ratio.iter().all(|r| (r - ratio[0]).norm() < 1e-10 * ratio[0].norm().max(1.0)));
    }

    #[test]
    fn residuals_are_second_order_in_dt() {
        let g = SpatialGrid::hard_wall(128, -10.0, 10.0).unwrap();
        let pot = PotentialSpec::harmonic(&g, 0.6, 0.0).unwrap();
        let psi_i = make_gaussian(&g, -1.0, 1.0, 1.0, 0.0).unwrap();
        let psi_f = make_gaussian(&g, 1.0, 1.2, 0.0, 0.4).unwrap();
        let run = |dt: f64| {
            let evo = Evolver::new(&g, &pot, dt).unwrap();
            let (i, f) = joint(&evo, &psi_i, &psi_f);
            let [ri, rf] = field_equation_residuals(&i, &f, &pot, None).unwrap();
            let [c, a, _] = noether_checks(&i, &f, &pot, None, 1.0).unwrap();
            assert!(a.max_abs < 1e-10);
            (ri.max_abs, rf.max_abs, c.max_abs)
        };
        let (i1, f1, c1) = run(0.02);
        let (i2, f2, c2) = run(0.01);
        assert!(i1 / i2 >= 3.5 && f1 / f2 >= 3.5, "{} {}", i1 / i2, f1 / f2);
        assert!(c1 / c2 >= 3.5, "continuity ratio {}", c1 / c2);
    }

    #[test]
    fn exact_phase_evolution_has_tiny_residual() {
        let g = SpatialGrid::hard_wall(64, -6.0, 6.0).unwrap();
        let pot = PotentialSpec::harmonic(&g, 1.0, 0.0).unwrap();
        let (phi, e) = ground_state(&g, &pot.values_at(0.0, None).unwrap());
        let dt = 1e-5;
        let traj: Vec<WaveField> = (0..5)
            .map(|k| {
                let t = k as f64 * dt;
                let ph = Complex64::from_polar(1.0, -e * t);
                WaveField::new(g, phi.iter().map(|v| v * ph).collect(), t).unwrap()
            })
            .collect();
        let [r, _] = field_equation_residuals(&traj, &traj, &pot, None).unwrap();
        assert!(r.max_abs < 1e-10, "{}", r.max_abs);
    }

    #[test]
    fn corrupted_snapshot_is_located() {
        let g = SpatialGrid::hard_wall(64, -8.0, 8.0).unwrap();
        let pot = PotentialSpec::free(&g);
        let evo = Evolver::new(&g, &pot, 0.01).unwrap();
        let psi = make_gaussian(&g, 0.0, 1.0, 0.5, 0.0).unwrap();
        let mut traj = evo.trajectory(&psi, 0.2, 1).unwrap();
        let clean = field_equation_residuals(&traj, &traj, &pot, None).unwrap()[0].max_abs;
        let bumped: Vec<Complex64> = traj[10].values().iter().map(|v| v + 1e-3 * v.norm()).collect();
        traj[10] = WaveField::new(g, bumped, traj[10].time()).unwrap();
        let [r, _] = field_equation_residuals(&traj, &traj, &pot, None).unwrap();
        assert!(r.max_abs > 1e-4 && r.max_abs > 100.0 * clean);
        assert!((9..=11).contains(&r.worst_index), "{}", r.worst_index);
        assert!(r.per_time[5] < 1e-4);
    }

    #[test]
    fn same_field_reduces_to_probability_current() {
        let g = SpatialGrid::periodic(128, -10.0, 10.0).unwrap();
        let pot = PotentialSpec::free(&g);
        let evo = Evolver::new(&g, &pot, 0.01).unwrap();
        let psi = make_gaussian(&g, 0.0, 1.0, 2.0, 0.0).unwrap();
        let traj = evo.trajectory(&psi, 0.3, 1).unwrap();
        let [c, a, e] = noether_checks(&traj, &traj, &pot, None, 1.0).unwrap();
        assert!(c.max_abs < 1e-3);
        assert!(a.max_abs < 1e-12 && e.max_abs < 1e-10);
        // Real-valued density and current in the standard case.
        let j = link_current(traj[3].values(), traj[3].values(), &g);
        assert!(j.iter().all(|v| v.im.abs() < 1e-14));
    }

    #[test]
    fn energy_jumps_only_at_potential_switch() {
        let g = SpatialGrid::hard_wall(96, -10.0, 10.0).unwrap();
        let xs = g.coordinates();
        let pot = PotentialSpec::new(
            &g,
            vec![
                crate::evolution::PotentialSegment::new(f64::NEG_INFINITY, 0.5, xs.iter().map(|x| 0.3 * x * x).collect()),
                crate::evolution::PotentialSegment::new(0.5, f64::INFINITY, xs.iter().map(|x| 0.5 * x * x).collect()),
            ],
        )
        .unwrap();
        let evo = Evolver::new(&g, &pot, 0.05).unwrap();
        let psi_i = make_gaussian(&g, -1.0, 1.0, 0.0, 0.0).unwrap();
        let psi_f = make_gaussian(&g, 1.0, 1.0, 0.5, 1.0).unwrap();
        let (i, f) = joint(&evo, &psi_i, &psi_f);
        let [_, a, e] = noether_checks(&i, &f, &pot, None, 1.0).unwrap();
        assert!(a.max_abs < 1e-10);
        let switch = 10;
        assert!(e.per_time[switch] > 1e-3);
        for (k, d) in e.per_time.iter().enumerate() {
            if k != switch {
                assert!(*d < 1e-10, "step {k}: {d}");
            }
        }
        let line = e.to_json_line();
        assert!(line.contains("\"quantity\":\"energy_drift\""));
        assert_eq!(to_json_lines(&[a, e]).lines().count(), 2);
    }
}
