//! Two-channel model of a gradual spin measurement. The magnet adds
//! `+lambda (x - c)` to the "+" channel and `-lambda (x - c)` to the "-"
//! channel while it is on; the final state selects one outcome.

use num_complex::Complex64;

use super::{abs_mass, merge_times, sweep, Comparison, ScenarioConfig, ScenarioName, ScenarioReport, StateSpec};
use crate::densities::{amplitude_floor, density, total, DensityField, Observable};
use crate::error::{Error, Result};
use crate::evolution::{Channel, Evolver, PotentialJson, PotentialPreset, PotentialSpec};
use crate::fields::{inner_product, make_gaussian, WaveField};

fn spin(c: [f64; 2]) -> Complex64 {
    Complex64::new(c[0], c[1])
}

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let sg = cfg
        .stern_gerlach
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing \"stern_gerlach\" section".into()))?;
    if !matches!(cfg.potential, PotentialJson::Preset(PotentialPreset::Free)) {
        return Err(Error::InvalidConfig(
            "stern_gerlach builds its own potential; leave \"potential\" unset".into(),
        ));
    }
    let grid = cfg.grid;
    let potential = PotentialSpec::stern_gerlach(&grid, sg.lambda, sg.center, sg.t_on, sg.t_off)?;
    let evo = [
        Evolver::for_channel(&grid, &potential, cfg.dt, Channel::Plus)?,
        Evolver::for_channel(&grid, &potential, cfg.dt, Channel::Minus)?,
    ];
    let phi_i = cfg
        .initial_or(StateSpec::Gaussian {
            center: 0.0,
            width: 3.0,
            wavenumber: 0.0,
        })
        .build(&grid, cfg.t1)?;
    let sigma = std::f64::consts::SQRT_2 * phi_i.position_spread();
    let s_i = [spin(sg.initial_spin[0]), spin(sg.initial_spin[1])];
    let s_f = [spin(sg.final_spin[0]), spin(sg.final_spin[1])];
    // The selected outcome is the channel the final state favours.
    let selected = if s_f[0].norm() >= s_f[1].norm() { 0 } else { 1 };
    let unmatched = 1 - selected;

    let branch_end = [evo[0].evolve(&phi_i, cfg.t2)?, evo[1].evolve(&phi_i, cfg.t2)?];
    let phi_f = match &sg.final_profile {
        Some(spec) => spec.build(&grid, cfg.t2)?,
        None => {
            // Match the selected branch's mean position and momentum.
            let b = &branch_end[selected];
            let p = total(&density(&Observable::Momentum, b, b)?).re;
            make_gaussian(&grid, b.expectation_position(), sigma, p, cfg.t2)?
        }
    };

    let snaps = cfg.snapshots()?;
    let events: Vec<f64> = [sg.t_on, sg.t_off]
        .into_iter()
        .filter(|&t| t >= cfg.t1 && t <= cfg.t2)
        .collect();
    let times = merge_times(&[&snaps, &events], cfg.dt);
    let mut fwd: Vec<Vec<WaveField>> = Vec::new();
    let mut bwd: Vec<Vec<WaveField>> = Vec::new();
    for c in 0..2 {
        fwd.push(sweep(&evo[c], &phi_i.scaled(s_i[c]), &[], &times)?);
        bwd.push(sweep(&evo[c], &phi_f.scaled(s_f[c]), &[], &times)?);
    }

    let mut report = ScenarioReport::new(ScenarioName::SternGerlach);
    report.diag(
        "branch_separation_sigma",
        (branch_end[0].expectation_position() - branch_end[1].expectation_position()).abs() / sigma,
    );
    let amp = |k: usize| -> Result<Complex64> { Ok(inner_product(&bwd[0][k], &fwd[0][k])? + inner_product(&bwd[1][k], &fwd[1][k])?) };
    let norm2 = |fields: &Vec<Vec<WaveField>>| (fields[0][0].norm_sqr() + fields[1][0].norm_sqr()).sqrt();
    let a0 = amp(0)?;
    let floor = amplitude_floor(norm2(&bwd), norm2(&fwd));
    if a0.norm() <= floor {
        report.check(cfg, "consistent_history", 0.0, 0.5, Comparison::Above);
        report.flag_no_history(
            "stern_gerlach",
            &Error::AmplitudeNearZero {
                amplitude: a0,
                floor,
            },
        );
        report.skip(cfg, "unmatched_branch_fraction", 1e-8, Comparison::Below);
        report.skip(cfg, "pre_measurement_overlap", 0.5, Comparison::Above);
        report.skip(cfg, "amplitude_constant", super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
        return Ok(report);
    }
    report.check(cfg, "consistent_history", 1.0, 0.5, Comparison::Above);

    let mut per_channel: [Vec<DensityField>; 2] = [Vec::new(), Vec::new()];
    let mut combined = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let a = amp(k)?;
        report.trace(t, a);
        let mut sum = vec![Complex64::new(0.0, 0.0); grid.n_points()];
        for c in 0..2 {
            let vals: Vec<Complex64> = bwd[c][k]
                .values()
                .iter()
                .zip(fwd[c][k].values())
                .map(|(f, i)| f.conj() * i / a)
                .collect();
            for (s, v) in sum.iter_mut().zip(&vals) {
                *s += v;
            }
            let name = if c == 0 { "mass_plus" } else { "mass_minus" };
            per_channel[c].push(DensityField::new(grid, vals, name, t, a));
        }
        combined.push(DensityField::new(grid, sum, "mass", t, a));
    }

    let abs_total = |k: usize| abs_mass(&per_channel[0][k], |_| true) + abs_mass(&per_channel[1][k], |_| true);
    let after: Vec<usize> = (0..times.len()).filter(|&k| times[k] >= sg.t_off - 1e-9 * cfg.dt).collect();
    let before: Vec<usize> = (0..times.len()).filter(|&k| times[k] <= sg.t_on + 1e-9 * cfg.dt).collect();
    if after.is_empty() {
        report.skip(cfg, "unmatched_branch_fraction", 1e-8, Comparison::Below);
    } else {
        let frac = after
            .iter()
            .map(|&k| abs_mass(&per_channel[unmatched][k], |_| true) / abs_total(k))
            .fold(0.0, f64::max);
        report.check(cfg, "unmatched_branch_fraction", frac, 1e-8, Comparison::Below);
    }
    if before.is_empty() {
        report.skip(cfg, "pre_measurement_overlap", 0.5, Comparison::Above);
    } else {
        let overlap = before.iter().map(|&k| abs_total(k)).fold(f64::INFINITY, f64::min);
        report.check(cfg, "pre_measurement_overlap", overlap, 0.5, Comparison::Above);
    }
    let drift = ScenarioReport::amplitude_drift(&report.amplitude_trace);
    report.check(cfg, "amplitude_constant", drift, super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);

    let [plus, minus] = per_channel;
    report.push_table("mass_plus", plus);
    report.push_table("mass_minus", minus);
    report.push_table("mass", combined);
    Ok(report)
}
