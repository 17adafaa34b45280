use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{PotentialJson, PotentialPreset};
use crate::fields::{make_gaussian, make_narrow_peak, make_plane_wave, random_field, SpatialGrid, WaveField};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Slit,
    TwoPosition,
    DoubleSlit,
    SternGerlach,
    MomentumConsistency,
    TripleMeasurement,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 6] = [
        ScenarioName::TwoPosition,
        ScenarioName::Slit,
        ScenarioName::DoubleSlit,
        ScenarioName::SternGerlach,
        ScenarioName::MomentumConsistency,
        ScenarioName::TripleMeasurement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Slit => "slit",
            ScenarioName::TwoPosition => "two_position",
            ScenarioName::DoubleSlit => "double_slit",
            ScenarioName::SternGerlach => "stern_gerlach",
            ScenarioName::MomentumConsistency => "momentum_consistency",
            ScenarioName::TripleMeasurement => "triple_measurement",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

/// Boundary state recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateSpec {
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        wavenumber: f64,
    },
    NarrowPeak {
        center: f64,
    },
    PlaneWave {
        mode: i64,
    },
    Random {
        seed: u64,
    },
}

impl StateSpec {
    pub fn build(&self, grid: &SpatialGrid, time: f64) -> Result<WaveField> {
        match *self {
            StateSpec::Gaussian {
                center,
                width,
                wavenumber,
            } => make_gaussian(grid, center, width, wavenumber, time),
            StateSpec::NarrowPeak { center } => make_narrow_peak(grid, center, time),
            StateSpec::PlaneWave { mode } => make_plane_wave(grid, mode, time),
            StateSpec::Random { seed } => Ok(random_field(grid, seed, time)),
        }
    }

    pub fn center(&self) -> Option<f64> {
        match *self {
            StateSpec::Gaussian { center, .. } | StateSpec::NarrowPeak { center } => Some(center),
            _ => None,
        }
    }
}

fn one_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TwoPositionConfig {
    /// `epsilon` in units of `dt`.
    #[serde(default = "one_step")]
    pub epsilon_steps: usize,
    /// Adds a `width_ratio` assertion `w(mid) / w(t1 + eps)` above this.
    #[serde(default)]
    pub min_width_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlitConfig {
    pub t_b: f64,
    pub centers: Vec<f64>,
    pub half_width: f64,
}

fn both_open() -> [bool; 2] {
    [true, true]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSlitConfig {
    pub t_b: f64,
    pub centers: [f64; 2],
    pub half_width: f64,
    #[serde(default = "both_open")]
    pub open: [bool; 2],
    /// Spatial half-width of each approach corridor (defaults to the slit's).
    #[serde(default)]
    pub corridor_half_width: Option<f64>,
    /// Length of the pre-barrier window `[t_b - duration, t_b)`.
    pub corridor_duration: f64,
}

fn equal_spin() -> [[f64; 2]; 2] {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    [[a, 0.0], [a, 0.0]]
}

fn plus_only() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [0.0, 0.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SternGerlachConfig {
    pub lambda: f64,
    #[serde(default)]
    pub center: f64,
    pub t_on: f64,
    pub t_off: f64,
    /// `[[re, im] plus, [re, im] minus]` spin amplitudes of the initial state.
    #[serde(default = "equal_spin")]
    pub initial_spin: [[f64; 2]; 2],
    #[serde(default = "plus_only")]
    pub final_spin: [[f64; 2]; 2],
    /// Spatial profile of the final state; defaults to a Gaussian of the
    /// initial width with the mean position and momentum of the forward
    /// branch it selects.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_profile: Option<StateSpec>,
}

fn modes() -> Vec<i64> {
    (-5..=5).collect()
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumConfig {
    #[serde(default = "modes")]
    pub modes: Vec<i64>,
    #[serde(default = "twenty")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    /// Mode whose density time series is emitted.
    #[serde(default = "three")]
    pub emitted_mode: i64,
}

fn three() -> i64 {
    3
}

impl Default for MomentumConfig {
    fn default() -> Self {
        Self {
            modes: modes(),
            draws: twenty(),
            seed: 0,
            emitted_mode: three(),
        }
    }
}

/// `psi_1 = initial` at `t1`, `psi_2 = final` at `t2`, `psi_3 = third` at `t3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripleConfig {
    pub t3: f64,
    pub third: StateSpec,
}

fn is_free(p: &PotentialJson) -> bool {
    *p == PotentialJson::Preset(PotentialPreset::Free)
}

fn default_snapshot_count() -> usize {
    21
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default, alias = "name", skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioName>,
    pub grid: SpatialGrid,
    pub dt: f64,
    pub t1: f64,
    pub t2: f64,
    /// Must stay free for `stern_gerlach`, whose magnet comes from its own
    /// section.
    #[serde(default, skip_serializing_if = "is_free")]
    pub potential: PotentialJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<StateSpec>,
    #[serde(default, rename = "final", skip_serializing_if = "Option::is_none")]
    pub final_state: Option<StateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_times: Option<Vec<f64>>,
    /// Evenly spaced snapshots used when `snapshot_times` is absent.
    #[serde(default = "default_snapshot_count")]
    pub snapshot_count: usize,
    /// Threshold overrides keyed by assertion name.
    #[serde(default, alias = "assertions", skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_position: Option<TwoPositionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slit: Option<SlitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double_slit: Option<DoubleSlitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stern_gerlach: Option<SternGerlachConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<MomentumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triple: Option<TripleConfig>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Last time covered by the run (`t3` for the triple measurement).
    pub fn t_end(&self) -> f64 {
        self.triple.as_ref().map_or(self.t2, |t| t.t3)
    }

    pub(crate) fn initial_or(&self, fallback: StateSpec) -> StateSpec {
        self.initial.clone().unwrap_or(fallback)
    }

    pub(crate) fn final_or(&self, fallback: StateSpec) -> StateSpec {
        self.final_state.clone().unwrap_or(fallback)
    }

    fn steps_from_t1(&self, t: f64) -> Result<i64> {
        let s = (t - self.t1) / self.dt;
        let r = s.round();
        if (s - r).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "time {t} is not a whole number of steps of {} from t1 = {}",
                self.dt, self.t1
            )));
        }
        Ok(r as i64)
    }

    pub(crate) fn step_time(&self, steps: i64) -> f64 {
        self.t1 + steps as f64 * self.dt
    }

    /// Snapshot times on the step lattice, strictly increasing, within
    /// `[t1, t_end]`.
    pub fn snapshots(&self) -> Result<Vec<f64>> {
        let end = self.t_end();
        let total = self.steps_from_t1(end)?;
        if let Some(ts) = &self.snapshot_times {
            if ts.is_empty() {
                return Err(Error::InvalidConfig("snapshot_times is empty".into()));
            }
            let mut prev = i64::MIN;
            let mut out = Vec::with_capacity(ts.len());
            for &t in ts {
                let s = self.steps_from_t1(t)?;
                if s <= prev {
                    return Err(Error::InvalidConfig("snapshot times must be strictly increasing".into()));
                }
                if s < 0 || s > total {
                    return Err(Error::InvalidConfig(format!("snapshot time {t} outside [{}, {end}]", self.t1)));
                }
                prev = s;
                out.push(self.step_time(s));
            }
            return Ok(out);
        }
        if self.snapshot_count == 0 {
            return Err(Error::InvalidConfig("snapshot_count must be positive".into()));
        }
        if total == 0 || self.snapshot_count == 1 {
            return Ok(vec![self.t1]);
        }
        let mut steps: Vec<i64> = (0..self.snapshot_count)
            .map(|j| (j as f64 * total as f64 / (self.snapshot_count - 1) as f64).round() as i64)
            .collect();
        steps.dedup();
        Ok(steps.into_iter().map(|s| self.step_time(s)).collect())
    }

    pub(crate) fn validate(&self, name: ScenarioName) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "schema {} is not supported (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        if let Some(own) = self.scenario {
            if own != name {
                return Err(Error::InvalidConfig(format!("config is for {own}, not {name}")));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t1.is_finite() && self.t2.is_finite() && self.t2 >= self.t1) {
            return Err(Error::InvalidConfig(format!("need t1 <= t2, got {} and {}", self.t1, self.t2)));
        }
        self.steps_from_t1(self.t2)?;
        if name == ScenarioName::TripleMeasurement {
            let t = self
                .triple
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("missing \"triple\" section".into()))?;
            if !(t.t3 > self.t2) {
                return Err(Error::InvalidConfig(format!("need t2 < t3, got {} and {}", self.t2, t.t3)));
            }
        }
        self.snapshots()?;
        Ok(())
    }

    /// Built-in reference configuration for each scenario.
    pub fn reference(name: ScenarioName) -> Self {
        let base = |grid: SpatialGrid, dt: f64, t2: f64| ScenarioConfig {
            schema: SCHEMA_VERSION,
            scenario: Some(name),
            grid,
            dt,
            t1: 0.0,
            t2,
            potential: PotentialJson::Preset(PotentialPreset::Free),
            initial: None,
            final_state: None,
            snapshot_times: None,
            snapshot_count: default_snapshot_count(),
            tolerances: BTreeMap::new(),
            two_position: None,
            slit: None,
            double_slit: None,
            stern_gerlach: None,
            momentum: None,
            triple: None,
        };
        let narrow = SpatialGrid::hard_wall(512, -25.55, 25.55).expect("valid grid");
        let wide = SpatialGrid::hard_wall(512, -38.325, 38.325).expect("valid grid");
        match name {
            ScenarioName::TwoPosition => {
                // sigma = 3 dx = 0.3; free spreading triples the width at
                // t = sqrt(8) sigma^2 ~ 0.255, the midpoint.
                let mut c = base(narrow, 0.001, 0.51);
                c.initial = Some(StateSpec::NarrowPeak { center: 0.0 });
                c.final_state = Some(StateSpec::NarrowPeak { center: 0.0 });
                c.two_position = Some(TwoPositionConfig {
                    epsilon_steps: 1,
                    min_width_ratio: Some(2.0),
                });
                c
            }
            ScenarioName::Slit => {
                let mut c = base(narrow, 0.005, 2.0);
                c.initial = Some(StateSpec::Gaussian {
                    center: 0.0,
                    width: 3.0,
                    wavenumber: 0.0,
                });
                c.final_state = Some(StateSpec::NarrowPeak { center: 2.0 });
                c.slit = Some(SlitConfig {
                    t_b: 1.0,
                    centers: vec![1.0],
                    half_width: 0.5,
                });
                c
            }
            ScenarioName::DoubleSlit => {
                let mut c = base(wide, 0.005, 4.0);
                c.initial = Some(StateSpec::Gaussian {
                    center: 0.0,
                    width: 5.0,
                    wavenumber: 0.0,
                });
                c.final_state = Some(StateSpec::NarrowPeak { center: 0.0 });
                c.double_slit = Some(DoubleSlitConfig {
                    t_b: 2.0,
                    centers: [-3.0, 3.0],
                    half_width: 0.5,
                    open: [false, true],
                    corridor_half_width: None,
                    corridor_duration: 0.5,
                });
                c
            }
            ScenarioName::SternGerlach => {
                // Each branch moves 6 lambda by t2 in the continuum, so
                // lambda = 1.5 would put the branches 18 = 6 sigma apart; the
                // lattice group velocity at k dx ~ 0.45 is about 3% slower,
                // hence the slightly stronger gradient.
                let mut c = base(wide, 0.005, 5.0);
                c.initial = Some(StateSpec::Gaussian {
                    center: 0.0,
                    width: 3.0,
                    wavenumber: 0.0,
                });
                c.stern_gerlach = Some(SternGerlachConfig {
                    lambda: 1.55,
                    center: 0.0,
                    t_on: 1.0,
                    t_off: 3.0,
                    initial_spin: equal_spin(),
                    final_spin: plus_only(),
                    final_profile: None,
                });
                c
            }
            ScenarioName::MomentumConsistency => {
                let ring = SpatialGrid::periodic(256, 0.0, 2.0 * std::f64::consts::PI).expect("valid grid");
                let mut c = base(ring, 0.01, 1.0);
                c.snapshot_count = 11;
                c.momentum = Some(MomentumConfig::default());
                c
            }
            ScenarioName::TripleMeasurement => {
                let g = SpatialGrid::hard_wall(256, -12.75, 12.75).expect("valid grid");
                let mut c = base(g, 0.01, 1.0);
                let gauss = |center| StateSpec::Gaussian {
                    center,
                    width: 1.0,
                    wavenumber: 0.0,
                };
                c.initial = Some(gauss(-1.0));
                c.final_state = Some(gauss(0.0));
                c.triple = Some(TripleConfig {
                    t3: 2.0,
                    third: gauss(1.0),
                });
                c
            }
        }
    }
}
