//! Narrow peaks at both ends: the density expands from one point and
//! contracts onto the other.

use super::{abs_width, index_of, merge_times, sweep, Comparison, ScenarioConfig, ScenarioName, ScenarioReport, StateSpec};
use crate::densities::{amplitude, amplitude_floor, density, DensityField, Observable};
use crate::error::{Error, Result};
use crate::evolution::Evolver;
use crate::fields::WaveField;

/// Forward and backward states at a common set of times.
pub(crate) struct Pair {
    pub times: Vec<f64>,
    pub forward: Vec<WaveField>,
    pub backward: Vec<WaveField>,
}

impl Pair {
    /// Mass densities at every time, or the amplitude error when the two
    /// boundary states have no consistent history.
    pub fn mass(&self) -> Result<Vec<DensityField>> {
        self.forward
            .iter()
            .zip(&self.backward)
            .map(|(i, f)| density(&Observable::Mass(1.0), f, i))
            .collect()
    }

    pub fn amplitudes(&self) -> Result<Vec<num_complex::Complex64>> {
        self.forward.iter().zip(&self.backward).map(|(i, f)| amplitude(f, i)).collect()
    }
}

/// `Err(AmplitudeNearZero)` if `A` at the first time falls below the floor.
pub(crate) fn check_history(pair: &Pair) -> Result<()> {
    let (i, f) = (&pair.forward[0], &pair.backward[0]);
    let a = amplitude(f, i)?;
    let floor = amplitude_floor(f.norm(), i.norm());
    if a.norm() <= floor {
        return Err(Error::AmplitudeNearZero {
            amplitude: a,
            floor,
        });
    }
    Ok(())
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let grid = cfg.grid;
    let potential = cfg.potential.build(&grid)?;
    let evo = Evolver::new(&grid, &potential, cfg.dt)?;
    let initial = cfg.initial_or(StateSpec::NarrowPeak { center: 0.0 });
    let fin = cfg.final_or(StateSpec::NarrowPeak { center: 0.0 });
    let psi_i = initial.build(&grid, cfg.t1)?;
    let psi_f = fin.build(&grid, cfg.t2)?;
    let opts = cfg.two_position.clone().unwrap_or_default();

    let snaps = cfg.snapshots()?;
    let total_steps = ((cfg.t2 - cfg.t1) / cfg.dt).round() as i64;
    let eps = (opts.epsilon_steps as i64).min(total_steps / 2);
    let t_eps = cfg.step_time(eps);
    let t_end_eps = cfg.step_time(total_steps - eps);
    let t_mid = cfg.step_time(total_steps / 2);
    let mirrored: Vec<f64> = snaps
        .iter()
        .map(|&t| cfg.step_time(total_steps - ((t - cfg.t1) / cfg.dt).round() as i64))
        .collect();
    let times = merge_times(&[&snaps, &mirrored, &[t_eps, t_end_eps, t_mid]], cfg.dt);
    let pair = Pair {
        forward: sweep(&evo, &psi_i, &[], &times)?,
        backward: sweep(&evo, &psi_f, &[], &times)?,
        times,
    };

    let mut report = ScenarioReport::new(ScenarioName::TwoPosition);
    let single_instant = total_steps == 0;
    let symmetric = match (initial.center(), fin.center()) {
        (Some(a), Some(b)) => (a - b).abs() < 1e-12,
        _ => false,
    };
    let displaced = match (initial.center(), fin.center()) {
        (Some(a), Some(b)) if !symmetric => Some((a, b)),
        _ => None,
    };

    if let Err(e) = check_history(&pair) {
        report.check(cfg, "consistent_history", 0.0, 0.5, Comparison::Above);
        report.flag_no_history("two_position", &e);
        if single_instant {
            report.skip(cfg, "width_constant", 1e-12, Comparison::Below);
        } else {
            report.skip(cfg, "width_start_below_mid", 1.0, Comparison::Below);
            report.skip(cfg, "width_end_below_mid", 1.0, Comparison::Below);
            if opts.min_width_ratio.is_some() {
                report.skip(cfg, "width_ratio", 2.0, Comparison::Above);
            }
            if symmetric {
                report.skip(cfg, "symmetric_profile", 0.05, Comparison::Below);
            }
            if displaced.is_some() {
                report.skip(cfg, "centroid_monotonic", 1e-2, Comparison::Below);
            }
        }
        report.skip(cfg, "amplitude_constant", super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
        return Ok(report);
    }
    report.check(cfg, "consistent_history", 1.0, 0.5, Comparison::Above);

    let rho = pair.mass()?;
    let widths: Vec<f64> = rho.iter().map(abs_width).collect();
    let w = |t: f64| widths[index_of(&pair.times, t, cfg.dt)];
    for (t, a) in pair.times.iter().zip(pair.amplitudes()?) {
        report.trace(*t, a);
    }

    if single_instant {
        report.check(cfg, "width_constant", 0.0, 1e-12, Comparison::Below);
    } else {
        let (w0, wm, w1) = (w(t_eps), w(t_mid), w(t_end_eps));
        report.diag("width_start", w0);
        report.diag("width_mid", wm);
        report.diag("width_end", w1);
        report.check(cfg, "width_start_below_mid", w0 / wm, 1.0, Comparison::Below);
        report.check(cfg, "width_end_below_mid", w1 / wm, 1.0, Comparison::Below);
        if let Some(r) = opts.min_width_ratio {
            report.check(cfg, "width_ratio", wm / w0, r, Comparison::Above);
        }
        if symmetric {
            let worst = snaps
                .iter()
                .zip(&mirrored)
                .map(|(&a, &b)| (w(a) - w(b)).abs() / wm)
                .fold(0.0, f64::max);
            report.check(cfg, "symmetric_profile", worst, 0.05, Comparison::Below);
        }
        if let Some((xa, xb)) = displaced {
            let centroids: Vec<f64> = rho.iter().map(weak_position).collect();
            report.diag("centroid_start", centroids[0]);
            report.diag("centroid_end", *centroids.last().expect("nonempty"));
            let dir = (xb - xa).signum();
            let backtrack = centroids
                .windows(2)
                .map(|p| (-(p[1] - p[0]) * dir).max(0.0))
                .fold(0.0, f64::max);
            report.check(cfg, "centroid_monotonic", backtrack / (xb - xa).abs(), 1e-2, Comparison::Below);
        }
    }
    let drift = ScenarioReport::amplitude_drift(&report.amplitude_trace);
    report.check(cfg, "amplitude_constant", drift, super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);

    // Every evaluated time is emitted so the widths can be recomputed.
    report.push_table("mass", rho);
    Ok(report)
}

/// `Re sum x rho dx` (the density's total is one).
fn weak_position(d: &DensityField) -> f64 {
    d.grid()
        .coordinates()
        .iter()
        .zip(d.values())
        .map(|(x, v)| x * v.re)
        .sum::<f64>()
        * d.grid().dx()
}
