//! Unitary Crank-Nicolson evolution of [`WaveField`]s forward and backward
//! in time under a piecewise-constant potential.

mod potential;
mod step;

use std::sync::{Arc, OnceLock};

pub use potential::{Channel, PotentialJson, PotentialPreset, PotentialSegment, PotentialSpec, SegmentJson};
pub use step::{build_step, step_backward, step_forward, unitarity_defect, StepOperator};

use crate::error::{Error, Result};
use crate::fields::{SpatialGrid, WaveField};

/// Relative slack (in units of `dt`) for deciding that a target time is a
/// whole number of steps away.
pub const STEP_ROUNDING: f64 = 1e-9;

/// Stepping driver that caches one [`StepOperator`] per potential segment.
#[derive(Debug)]
pub struct Evolver {
    grid: SpatialGrid,
    potential: PotentialSpec,
    dt: f64,
    channel: Option<Channel>,
    cache: Vec<OnceLock<Arc<StepOperator>>>,
}

impl Evolver {
    pub fn new(grid: &SpatialGrid, potential: &PotentialSpec, dt: f64) -> Result<Self> {
        Self::build(grid, potential, dt, None)
    }

    /// Evolver for one channel of a two-channel potential.
    pub fn for_channel(grid: &SpatialGrid, potential: &PotentialSpec, dt: f64, channel: Channel) -> Result<Self> {
        Self::build(grid, potential, dt, Some(channel))
    }

    fn build(grid: &SpatialGrid, potential: &PotentialSpec, dt: f64, channel: Option<Channel>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        if potential.n_points() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: *grid,
            potential: potential.clone(),
            dt,
            channel,
            cache: potential.segments().iter().map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn channel(&self) -> Option<Channel> {
        self.channel
    }

    /// Signed number of whole steps from `from` to `to`.
    pub fn steps_between(&self, from: f64, to: f64) -> Result<i64> {
        let raw = (to - from) / self.dt;
        let n = raw.round();
        if (raw - n).abs() > STEP_ROUNDING || !raw.is_finite() {
            return Err(Error::UnreachableTime {
                from,
                target: to,
                dt: self.dt,
            });
        }
        Ok(n as i64)
    }

    /// Operator for the step spanning `[t0, t1]` (either order).
    pub fn operator_for_step(&self, t0: f64, t1: f64) -> Result<Arc<StepOperator>> {
        let idx = self
            .potential
            .segment_for_step(t0, t1, STEP_ROUNDING * self.dt)?;
        if let Some(op) = self.cache[idx].get() {
            return Ok(op.clone());
        }
        let seg = &self.potential.segments()[idx];
        let op = build_step(&self.grid, &seg.values_for(self.channel), self.dt)?
            .with_window(seg.t_start, seg.t_end, idx);
        Ok(self.cache[idx].get_or_init(|| Arc::new(op)).clone())
    }

    /// Evolve to `t_target`, forwards or backwards as needed.
    pub fn evolve(&self, field: &WaveField, t_target: f64) -> Result<WaveField> {
        let mut last = None;
        self.walk(field, t_target, |_, f| last = Some(f.clone()))?;
        Ok(last.unwrap_or_else(|| field.clone()))
    }

    /// Every `every`-th state from `field` to `t_target` inclusive of both
    /// ends, in stepping order.
    pub fn trajectory(&self, field: &WaveField, t_target: f64, every: usize) -> Result<Vec<WaveField>> {
        let every = every.max(1);
        let n = self.steps_between(field.time(), t_target)?.unsigned_abs() as usize;
        let mut out = vec![field.clone()];
        self.walk(field, t_target, |j, f| {
            if j % every == 0 || j == n {
                out.push(f.clone());
            }
        })?;
        Ok(out)
    }

    /// States at the requested times (each a whole number of steps from the
    /// start and lying between start and target).
    pub fn snapshots(&self, field: &WaveField, times: &[f64]) -> Result<Vec<WaveField>> {
        let mut wanted: Vec<(usize, usize)> = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            let j = self.steps_between(field.time(), t)?;
            wanted.push((j.unsigned_abs() as usize, i));
        }
        let target = times
            .iter()
            .copied()
            .max_by(|a, b| (a - field.time()).abs().total_cmp(&(b - field.time()).abs()))
            .unwrap_or(field.time());
        let mut out: Vec<Option<WaveField>> = vec![None; times.len()];
        for &(j, i) in &wanted {
            if j == 0 {
                out[i] = Some(field.clone().with_time(times[i]));
            }
        }
        self.walk(field, target, |j, f| {
            for &(wj, i) in &wanted {
                if wj == j {
                    out[i] = Some(f.clone().with_time(times[i]));
                }
            }
        })?;
        out.into_iter()
            .enumerate()
            .map(|(i, f)| {
                f.ok_or(Error::UnreachableTime {
                    from: field.time(),
                    target: times[i],
                    dt: self.dt,
                })
            })
            .collect()
    }

    fn walk(&self, field: &WaveField, t_target: f64, mut visit: impl FnMut(usize, &WaveField)) -> Result<()> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.steps_between(field.time(), t_target)?;
        let sign = n.signum() as f64;
        let t0 = field.time();
        let mut current = field.clone();
        for j in 0..n.unsigned_abs() as usize {
            let ta = t0 + sign * j as f64 * self.dt;
            let tb = t0 + sign * (j + 1) as f64 * self.dt;
            let op = self.operator_for_step(ta, tb)?;
            let values = if sign > 0.0 {
                op.apply(current.values())
            } else {
                op.apply_adjoint(current.values())
            };
            let t = if j + 1 == n.unsigned_abs() as usize { t_target } else { tb };
            current = WaveField::from_parts_unchecked(self.grid, values, t);
            visit(j + 1, &current);
        }
        Ok(())
    }
}

/// One-shot convenience wrapper around [`Evolver::evolve`].
pub fn evolve_interval(field: &WaveField, potential: &PotentialSpec, dt: f64, t_target: f64) -> Result<WaveField> {
    Evolver::new(field.grid(), potential, dt)?.evolve(field, t_target)
}
