//! Aperture masks applied to both boundary states at the barrier time.

use num_complex::Complex64;

use super::two_position::{check_history, Pair};
use super::{
    abs_mass, index_of, merge_times, sweep, AmplitudePoint, Comparison, MaskEvent, ScenarioConfig, ScenarioName,
    ScenarioReport, StateSpec, AMPLITUDE_DRIFT_TOLERANCE,
};
use crate::densities::DensityField;
use crate::error::{Error, Result};
use crate::evolution::Evolver;
use crate::fields::{slit_mask, WaveField};

fn barrier_time(cfg: &ScenarioConfig, t_b: f64) -> Result<f64> {
    let s = (t_b - cfg.t1) / cfg.dt;
    let total = ((cfg.t2 - cfg.t1) / cfg.dt).round();
    if (s - s.round()).abs() > 1e-6 || s.round() < 1.0 || s.round() >= total {
        return Err(Error::InvalidConfig(format!(
            "barrier time {t_b} must be a whole step strictly inside ({}, {})",
            cfg.t1, cfg.t2
        )));
    }
    Ok(cfg.step_time(s.round() as i64))
}

fn masked_pair(evo: &Evolver, psi_i: &WaveField, psi_f: &WaveField, mask: &[f64], t_b: f64, times: Vec<f64>) -> Result<Pair> {
    let ev = [MaskEvent { time: t_b, mask }];
    Ok(Pair {
        forward: sweep(evo, psi_i, &ev, &times)?,
        backward: sweep(evo, psi_f, &ev, &times)?,
        times,
    })
}

/// Largest drift of `A` within the stretches before and from `t_b` on.
fn segmented_drift(trace: &[AmplitudePoint], t_b: f64, dt: f64) -> f64 {
    let split = trace.iter().position(|p| p.t >= t_b - 1e-9 * dt).unwrap_or(trace.len());
    ScenarioReport::amplitude_drift(&trace[..split]).max(ScenarioReport::amplitude_drift(&trace[split..]))
}

fn magnitudes(fields: &[WaveField], name: &'static str) -> Vec<DensityField> {
    fields
        .iter()
        .map(|f| {
            let mags = f.values().iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
            DensityField::new(*f.grid(), mags, name, f.time(), Complex64::new(1.0, 0.0))
        })
        .collect()
}

pub(super) fn run_slit(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let sc = cfg
        .slit
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing \"slit\" section".into()))?;
    let grid = cfg.grid;
    let evo = Evolver::new(&grid, &cfg.potential.build(&grid)?, cfg.dt)?;
    let t_b = barrier_time(cfg, sc.t_b)?;
    let psi_i = cfg
        .initial_or(StateSpec::Gaussian {
            center: 0.0,
            width: 3.0,
            wavenumber: 0.0,
        })
        .build(&grid, cfg.t1)?;
    let psi_f = cfg.final_or(StateSpec::NarrowPeak { center: 2.0 }).build(&grid, cfg.t2)?;
    let mask = slit_mask(&grid, &sc.centers, sc.half_width);
    let snaps = cfg.snapshots()?;
    let before = t_b - cfg.dt;
    let times = merge_times(&[&snaps, &[before, t_b]], cfg.dt);
    let pair = masked_pair(&evo, &psi_i, &psi_f, &mask, t_b, times)?;

    let mut report = ScenarioReport::new(ScenarioName::Slit);
    if let Err(e) = check_history(&pair) {
        report.check(cfg, "consistent_history", 0.0, 0.5, Comparison::Above);
        report.flag_no_history("slit", &e);
        report.skip(cfg, "outside_slit_density", 1e-6, Comparison::Below);
        report.skip(cfg, "psi_f_in_slit", 0.9, Comparison::Above);
        report.skip(cfg, "amplitude_constant", AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
        report.push_table("psi_i", magnitudes(&pair.forward, "psi_i"));
        report.push_table("psi_f", magnitudes(&pair.backward, "psi_f"));
        return Ok(report);
    }
    report.check(cfg, "consistent_history", 1.0, 0.5, Comparison::Above);
    let rho = pair.mass()?;
    for (t, a) in pair.times.iter().zip(pair.amplitudes()?) {
        report.trace(*t, a);
    }

    let at_b = &rho[index_of(&pair.times, t_b, cfg.dt)];
    let peak = at_b.max_abs();
    let outside = at_b
        .values()
        .iter()
        .zip(&mask)
        .filter(|(_, m)| **m == 0.0)
        .map(|(v, _)| v.norm())
        .fold(0.0, f64::max);
    report.check(cfg, "outside_slit_density", outside / peak, 1e-6, Comparison::Below);

    let f_before = &pair.backward[index_of(&pair.times, before, cfg.dt)];
    let near = slit_mask(&grid, &sc.centers, 2.0 * sc.half_width);
    let inside: f64 = f_before.values().iter().zip(&near).map(|(v, m)| m * v.norm_sqr()).sum();
    report.check(cfg, "psi_f_in_slit", inside / f_before.values().iter().map(|v| v.norm_sqr()).sum::<f64>(), 0.9, Comparison::Above);

    let drift = segmented_drift(&report.amplitude_trace, t_b, cfg.dt);
    report.check(cfg, "amplitude_constant", drift, AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
    report.diag("peak_density_at_barrier", peak);

    report.push_table("mass", rho);
    report.push_table("psi_i", magnitudes(&pair.forward, "psi_i"));
    report.push_table("psi_f", magnitudes(&pair.backward, "psi_f"));
    Ok(report)
}

struct CorridorRun {
    pair: Pair,
    rho: Option<Vec<DensityField>>,
    history: std::result::Result<(), Error>,
}

pub(super) fn run_double_slit(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let dc = cfg
        .double_slit
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing \"double_slit\" section".into()))?;
    let grid = cfg.grid;
    let evo = Evolver::new(&grid, &cfg.potential.build(&grid)?, cfg.dt)?;
    let t_b = barrier_time(cfg, dc.t_b)?;
    let psi_i = cfg
        .initial_or(StateSpec::Gaussian {
            center: 0.0,
            width: 5.0,
            wavenumber: 0.0,
        })
        .build(&grid, cfg.t1)?;
    let psi_f = cfg.final_or(StateSpec::NarrowPeak { center: 0.0 }).build(&grid, cfg.t2)?;
    let corridor_steps = (dc.corridor_duration / cfg.dt).round() as i64;
    let b_steps = ((t_b - cfg.t1) / cfg.dt).round() as i64;
    if corridor_steps < 1 || corridor_steps > b_steps {
        return Err(Error::InvalidConfig(format!(
            "corridor duration {} must span between one step and t_b - t1",
            dc.corridor_duration
        )));
    }
    let corridor: Vec<f64> = (b_steps - corridor_steps..b_steps).map(|s| cfg.step_time(s)).collect();
    let h = dc.corridor_half_width.unwrap_or(dc.half_width);
    let snaps = cfg.snapshots()?;
    let times = merge_times(&[&snaps, &corridor, &[t_b]], cfg.dt);

    let run_with = |open: [bool; 2]| -> Result<CorridorRun> {
        let centers: Vec<f64> = (0..2).filter(|&k| open[k]).map(|k| dc.centers[k]).collect();
        let mask = slit_mask(&grid, &centers, dc.half_width);
        let pair = masked_pair(&evo, &psi_i, &psi_f, &mask, t_b, times.clone())?;
        let history = check_history(&pair);
        let rho = match history {
            Ok(()) => Some(pair.mass()?),
            Err(_) => None,
        };
        Ok(CorridorRun { pair, rho, history })
    };
    let corridor_integral = |rho: &[DensityField], k: usize| -> f64 {
        corridor
            .iter()
            .map(|&t| abs_mass(&rho[index_of(&times, t, cfg.dt)], |x| (x - dc.centers[k]).abs() <= h + 1e-12))
            .sum::<f64>()
            * cfg.dt
    };
    let corridor_table = |rho: &[DensityField]| -> Vec<DensityField> {
        corridor
            .iter()
            .map(|&t| rho[index_of(&times, t, cfg.dt)].clone())
            .collect()
    };

    let mut report = ScenarioReport::new(ScenarioName::DoubleSlit);
    let main = run_with(dc.open)?;
    let closed: Vec<usize> = (0..2).filter(|&k| !dc.open[k]).collect();
    let Some(rho) = &main.rho else {
        report.check(cfg, "consistent_history", 0.0, 0.5, Comparison::Above);
        report.flag_no_history("double_slit", main.history.as_ref().expect_err("no densities"));
        match closed.len() {
            0 => report.skip(cfg, "corridor_symmetry", 0.02, Comparison::Below),
            1 => report.skip(cfg, "closed_corridor_ratio", 0.05, Comparison::Below),
            _ => {}
        }
        report.skip(cfg, "amplitude_constant", AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
        return Ok(report);
    };
    report.check(cfg, "consistent_history", 1.0, 0.5, Comparison::Above);
    for (t, a) in main.pair.times.iter().zip(main.pair.amplitudes()?) {
        report.trace(*t, a);
    }
    let c = [corridor_integral(rho, 0), corridor_integral(rho, 1)];
    report.diag("corridor_0", c[0]);
    report.diag("corridor_1", c[1]);
    match closed.as_slice() {
        [] => {
            let asym = (c[0] - c[1]).abs() / c[0].max(c[1]);
            report.check(cfg, "corridor_symmetry", asym, 0.02, Comparison::Below);
        }
        [k] => {
            let both = run_with([true, true])?;
            match &both.rho {
                Some(rho2) => {
                    let reference = corridor_integral(rho2, *k);
                    report.diag("corridor_two_slit_0", corridor_integral(rho2, 0));
                    report.diag("corridor_two_slit_1", corridor_integral(rho2, 1));
                    report.check(cfg, "closed_corridor_ratio", c[*k] / reference, 0.05, Comparison::Below);
                    report.push_table("corridor_two_slit", corridor_table(rho2));
                }
                None => {
                    report.flag_no_history("double_slit reference", both.history.as_ref().expect_err("no densities"));
                    report.skip(cfg, "closed_corridor_ratio", 0.05, Comparison::Below);
                }
            }
        }
        _ => unreachable!("a run with both slits closed has no history"),
    }
    let drift = segmented_drift(&report.amplitude_trace, t_b, cfg.dt);
    report.check(cfg, "amplitude_constant", drift, AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);

    report.push_table("corridor", corridor_table(rho));
    let snapshot_rho = snaps.iter().map(|&t| rho[index_of(&times, t, cfg.dt)].clone()).collect();
    report.push_table("mass", snapshot_rho);
    Ok(report)
}
