//! Three boundary states at `t1 < t2 < t3`. The density just before `t2`
//! comes from `(psi_2, psi_1)`, just after from `(psi_3, psi_2)`; the
//! jump between them is reported, not asserted.

use super::two_position::{check_history, Pair};
use super::{merge_times, sweep, Comparison, ScenarioConfig, ScenarioName, ScenarioReport, StateSpec};
use crate::densities::DensityField;
use crate::error::{Error, Result};
use crate::evolution::Evolver;

pub(super) fn run(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    let tc = cfg
        .triple
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("missing \"triple\" section".into()))?;
    let grid = cfg.grid;
    let evo = Evolver::new(&grid, &cfg.potential.build(&grid)?, cfg.dt)?;
    let gauss = |center| StateSpec::Gaussian {
        center,
        width: 1.0,
        wavenumber: 0.0,
    };
    let psi1 = cfg.initial_or(gauss(-1.0)).build(&grid, cfg.t1)?;
    let psi2 = cfg.final_or(gauss(0.0));
    let psi3 = tc.third.build(&grid, tc.t3)?;
    let (t1, t2, t3) = (cfg.t1, cfg.t2, tc.t3);
    // The step lattice starts at t1; t3 must lie on it too.
    let t3 = cfg.step_time(((t3 - t1) / cfg.dt).round() as i64);
    if ((tc.t3 - t3) / cfg.dt).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!("t3 = {} is not a whole number of steps from t1", tc.t3)));
    }

    let snaps = cfg.snapshots()?;
    let first: Vec<f64> = snaps.iter().copied().filter(|&t| t < t2).collect();
    let second: Vec<f64> = snaps.iter().copied().filter(|&t| t > t2).collect();
    let times_a = merge_times(&[&first, &[t1, t2]], cfg.dt);
    let times_b = merge_times(&[&[t2], &second, &[t3]], cfg.dt);
    let a = Pair {
        forward: sweep(&evo, &psi1, &[], &times_a)?,
        backward: sweep(&evo, &psi2.build(&grid, t2)?, &[], &times_a)?,
        times: times_a,
    };
    let b = Pair {
        forward: sweep(&evo, &psi2.build(&grid, t2)?, &[], &times_b)?,
        backward: sweep(&evo, &psi3, &[], &times_b)?,
        times: times_b,
    };

    let mut report = ScenarioReport::new(ScenarioName::TripleMeasurement);
    let mut segments: Vec<Option<Vec<DensityField>>> = Vec::new();
    for (label, pair) in [("first", &a), ("second", &b)] {
        let name = format!("consistent_history_{label}");
        match check_history(pair) {
            Ok(()) => {
                report.check(cfg, &name, 1.0, 0.5, Comparison::Above);
                let start = report.amplitude_trace.len();
                for (t, amp) in pair.times.iter().zip(pair.amplitudes()?) {
                    report.trace(*t, amp);
                }
                let drift = ScenarioReport::amplitude_drift(&report.amplitude_trace[start..]);
                report.check(cfg, &format!("amplitude_constant_{label}"), drift, super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
                segments.push(Some(pair.mass()?));
            }
            Err(e) => {
                report.check(cfg, &name, 0.0, 0.5, Comparison::Above);
                report.flag_no_history(&format!("{label} segment"), &e);
                report.skip(cfg, &format!("amplitude_constant_{label}"), super::AMPLITUDE_DRIFT_TOLERANCE, Comparison::Below);
                segments.push(None);
            }
        }
    }
    if let [Some(before), Some(after)] = segments.as_slice() {
        let at_end = before.last().expect("t2 is in the first segment");
        let at_start = &after[0];
        report.diag("jump_l2", at_end.l2_distance(at_start)?);
        report.diag("jump_max", {
            at_end
                .values()
                .iter()
                .zip(at_start.values())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max)
        });
    }
    let [before, after]: [Option<Vec<DensityField>>; 2] = segments.try_into().expect("two segments");
    if let Some(d) = before {
        report.push_table("mass_before", d);
    }
    if let Some(d) = after {
        report.push_table("mass_after", d);
    }
    Ok(report)
}
