use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::SpatialGrid;

/// Two-channel (Stern-Gerlach) label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Plus,
    Minus,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::Plus => 0,
            Channel::Minus => 1,
        }
    }

    pub fn other(self) -> Channel {
        match self {
            Channel::Plus => Channel::Minus,
            Channel::Minus => Channel::Plus,
        }
    }
}

/// Potential held fixed over `[t_start, t_end]`. Infinite ends are allowed
/// for the first and last segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub values: Vec<f64>,
    /// Extra potential seen by the `+` and `-` channels.
    pub channel_offsets: Option<[Vec<f64>; 2]>,
}

impl PotentialSegment {
    pub fn new(t_start: f64, t_end: f64, values: Vec<f64>) -> Self {
        Self {
            t_start,
            t_end,
            values,
            channel_offsets: None,
        }
    }

    pub fn with_channel_offsets(mut self, plus: Vec<f64>, minus: Vec<f64>) -> Self {
        self.channel_offsets = Some([plus, minus]);
        self
    }

    /// Potential seen by `channel` (plain values when `None` or when the
    /// segment has no channel offsets).
    pub fn values_for(&self, channel: Option<Channel>) -> Vec<f64> {
        match (channel, &self.channel_offsets) {
            (Some(c), Some(offsets)) => self
                .values
                .iter()
                .zip(&offsets[c.index()])
                .map(|(v, o)| v + o)
                .collect(),
            _ => self.values.clone(),
        }
    }

    pub fn contains(&self, t0: f64, t1: f64, slack: f64) -> bool {
        self.t_start <= t0 + slack && t1 <= self.t_end + slack
    }
}

/// Piecewise-in-time real potential on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    n_points: usize,
    segments: Vec<PotentialSegment>,
}

const JOIN_TOLERANCE: f64 = 1e-12;

impl PotentialSpec {
    pub fn new(grid: &SpatialGrid, segments: Vec<PotentialSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidPotential("no segments".into()));
        }
        let n = grid.n_points();
        for (i, s) in segments.iter().enumerate() {
            if s.values.len() != n {
                return Err(Error::InvalidPotential(format!(
                    "segment {i} has {} values, grid has {n}",
                    s.values.len()
                )));
            }
            if !s.values.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidPotential(format!("segment {i} has non-finite values")));
            }
            if let Some(offsets) = &s.channel_offsets {
                if offsets.iter().any(|o| o.len() != n || !o.iter().all(|v| v.is_finite())) {
                    return Err(Error::InvalidPotential(format!(
                        "segment {i} has malformed channel offsets"
                    )));
                }
            }
            if !(s.t_start < s.t_end) || s.t_start.is_nan() || s.t_end.is_nan() {
                return Err(Error::InvalidPotential(format!(
                    "segment {i} has empty interval [{}, {}]",
                    s.t_start, s.t_end
                )));
            }
            if i > 0 && (segments[i - 1].t_end - s.t_start).abs() > JOIN_TOLERANCE {
                return Err(Error::InvalidPotential(format!(
                    "gap or overlap between segments {} and {i}",
                    i - 1
                )));
            }
        }
        Ok(Self { n_points: n, segments })
    }

    /// A single time-independent potential valid for all times.
    pub fn stationary(grid: &SpatialGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(
            grid,
            vec![PotentialSegment::new(f64::NEG_INFINITY, f64::INFINITY, values)],
        )
    }

    pub fn free(grid: &SpatialGrid) -> Self {
        Self::stationary(grid, vec![0.0; grid.n_points()]).expect("free potential is valid")
    }

    pub fn harmonic(grid: &SpatialGrid, omega: f64, center: f64) -> Result<Self> {
        let v = grid
            .coordinates()
            .into_iter()
            .map(|x| 0.5 * omega * omega * (x - center).powi(2))
            .collect();
        Self::stationary(grid, v)
    }

    pub fn barrier(grid: &SpatialGrid, height: f64, left: f64, right: f64) -> Result<Self> {
        let v = grid
            .coordinates()
            .into_iter()
            .map(|x| if (left..=right).contains(&x) { height } else { 0.0 })
            .collect();
        Self::stationary(grid, v)
    }

    /// Free potential split into segments at the given event times, so that
    /// aperture events land on segment boundaries.
    pub fn free_with_breaks(grid: &SpatialGrid, times: &[f64]) -> Result<Self> {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(times);
        edges.push(f64::INFINITY);
        let segments = edges
            .windows(2)
            .map(|w| PotentialSegment::new(w[0], w[1], vec![0.0; grid.n_points()]))
            .collect();
        Self::new(grid, segments)
    }

    /// Opposite linear potentials `+-lambda (x - center)` on the two channels
    /// during `[t_on, t_off]`, free otherwise.
    pub fn stern_gerlach(grid: &SpatialGrid, lambda: f64, center: f64, t_on: f64, t_off: f64) -> Result<Self> {
        let n = grid.n_points();
        let plus: Vec<f64> = grid.coordinates().into_iter().map(|x| lambda * (x - center)).collect();
        let minus: Vec<f64> = plus.iter().map(|v| -v).collect();
        Self::new(
            grid,
            vec![
                PotentialSegment::new(f64::NEG_INFINITY, t_on, vec![0.0; n]),
                PotentialSegment::new(t_on, t_off, vec![0.0; n]).with_channel_offsets(plus, minus),
                PotentialSegment::new(t_off, f64::INFINITY, vec![0.0; n]),
            ],
        )
    }

    pub fn segments(&self) -> &[PotentialSegment] {
        &self.segments
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Index of the segment that wholly contains `[t0, t1]`.
    pub fn segment_for_step(&self, t0: f64, t1: f64, slack: f64) -> Result<usize> {
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        let mid = 0.5 * (lo + hi);
        let idx = self
            .segments
            .iter()
            .position(|s| s.t_start <= mid && mid <= s.t_end)
            .ok_or(Error::NoSegment(mid))?;
        if self.segments[idx].contains(lo, hi, slack) {
            Ok(idx)
        } else {
            Err(Error::StepStraddlesSegment { t0: lo, t1: hi })
        }
    }

    /// Potential values at time `t` (the later segment at a boundary).
    pub fn values_at(&self, t: f64, channel: Option<Channel>) -> Result<Vec<f64>> {
        self.segments
            .iter()
            .rev()
            .find(|s| s.t_start <= t && t <= s.t_end)
            .map(|s| s.values_for(channel))
            .ok_or(Error::NoSegment(t))
    }

    /// Times at which the potential changes.
    pub fn switch_times(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.t_start).collect()
    }
}

/// JSON form: a named preset or raw segment arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialJson {
    Preset(PotentialPreset),
    Raw { segments: Vec<SegmentJson> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum PotentialPreset {
    Free,
    Harmonic {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        center: f64,
    },
    Barrier {
        height: f64,
        left: f64,
        right: f64,
    },
    DoubleSlitMaskTimes {
        times: Vec<f64>,
    },
    SgGradient {
        lambda: f64,
        #[serde(default)]
        center: f64,
        t_on: f64,
        t_off: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    /// `null` means unbounded.
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_offsets: Option<[Vec<f64>; 2]>,
}

impl Default for PotentialJson {
    fn default() -> Self {
        PotentialJson::Preset(PotentialPreset::Free)
    }
}

impl PotentialJson {
    pub fn build(&self, grid: &SpatialGrid) -> Result<PotentialSpec> {
        match self {
            PotentialJson::Preset(p) => match p {
                PotentialPreset::Free => Ok(PotentialSpec::free(grid)),
                PotentialPreset::Harmonic { omega, center } => {
                    PotentialSpec::harmonic(grid, *omega, *center)
                }
                PotentialPreset::Barrier { height, left, right } => {
                    PotentialSpec::barrier(grid, *height, *left, *right)
                }
                PotentialPreset::DoubleSlitMaskTimes { times } => {
                    PotentialSpec::free_with_breaks(grid, times)
                }
                PotentialPreset::SgGradient {
                    lambda,
                    center,
                    t_on,
                    t_off,
                } => PotentialSpec::stern_gerlach(grid, *lambda, *center, *t_on, *t_off),
            },
            PotentialJson::Raw { segments } => PotentialSpec::new(
                grid,
                segments
                    .iter()
                    .map(|s| PotentialSegment {
                        t_start: s.t_start.unwrap_or(f64::NEG_INFINITY),
                        t_end: s.t_end.unwrap_or(f64::INFINITY),
                        values: s.values.clone(),
                        channel_offsets: s.channel_offsets.clone(),
                    })
                    .collect(),
            ),
        }
    }
}
