//! Browser bindings for the biwave scenarios.
//!
//! The page asks for a small preset config, edits it as JSON, and runs it.
//! Results come back as flat arrays ready for drawing: one row of `|rho|`
//! per snapshot time.

use biwave_core::fields::SpatialGrid;
use biwave_core::scenarios::{self, ScenarioConfig, ScenarioName, ScenarioReport, StateSpec};
use wasm_bindgen::prelude::*;

/// Reduced-size version of a reference config, sized to run in a browser
/// tab in about a second.
pub fn demo_config(name: ScenarioName) -> Result<ScenarioConfig, String> {
    let mut cfg = ScenarioConfig::reference(name);
    let grid = |n, dx: f64| SpatialGrid::hard_wall(n, -dx * (n - 1) as f64 / 2.0, dx * (n - 1) as f64 / 2.0);
    match name {
        ScenarioName::TwoPosition => {
            cfg.grid = grid(256, 0.1).map_err(|e| e.to_string())?;
            cfg.dt = 0.002;
        }
        ScenarioName::DoubleSlit => {
            cfg.grid = grid(256, 0.2).map_err(|e| e.to_string())?;
            cfg.dt = 0.01;
            cfg.initial = Some(StateSpec::Gaussian {
                center: 0.0,
                width: 3.5,
                wavenumber: 0.0,
            });
        }
        ScenarioName::SternGerlach => {
            cfg.grid = grid(256, 0.25).map_err(|e| e.to_string())?;
            cfg.dt = 0.01;
        }
        _ => {}
    }
    Ok(cfg)
}

/// Outcome of one scenario run, flattened for JavaScript.
#[wasm_bindgen]
pub struct DemoRun {
    report: ScenarioReport,
    report_json: String,
}

impl DemoRun {
    fn table_fields(&self, table: &str) -> &[biwave_core::densities::DensityField] {
        self.report.table(table).map(|t| t.fields.as_slice()).unwrap_or(&[])
    }
}

#[wasm_bindgen]
impl DemoRun {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }

    /// The full report as JSON (assertions, diagnostics, flags).
    pub fn report_json(&self) -> String {
        self.report_json.clone()
    }

    pub fn table_names(&self) -> Vec<String> {
        self.report.tables.iter().map(|t| t.name.clone()).collect()
    }

    pub fn times(&self, table: &str) -> Vec<f64> {
        self.table_fields(table).iter().map(|f| f.time()).collect()
    }

    pub fn x(&self, table: &str) -> Vec<f64> {
        self.table_fields(table)
            .first()
            .map(|f| f.grid().coordinates())
            .unwrap_or_default()
    }

    /// `|rho|` row-major: one row per time.
    pub fn magnitudes(&self, table: &str) -> Vec<f64> {
        self.table_fields(table)
            .iter()
            .flat_map(|f| f.values().iter().map(|v| v.norm()))
            .collect()
    }
}

pub fn parse_name(name: &str) -> Result<ScenarioName, String> {
    name.parse::<ScenarioName>().map_err(|e| e.to_string())
}

pub fn run_json(name: &str, config_json: &str) -> Result<DemoRun, String> {
    let name = parse_name(name)?;
    let cfg = ScenarioConfig::from_json(config_json).map_err(|e| e.to_string())?;
    let report = scenarios::run(name, &cfg).map_err(|e| e.to_string())?;
    let report_json = serde_json::to_string(&report).map_err(|e| e.to_string())?;
    Ok(DemoRun { report, report_json })
}

/// Preset config for `name` as pretty JSON.
#[wasm_bindgen(js_name = demoConfig)]
pub fn demo_config_json(name: &str) -> Result<String, JsError> {
    let cfg = demo_config(parse_name(name).map_err(|e| JsError::new(&e))?).map_err(|e| JsError::new(&e))?;
    serde_json::to_string_pretty(&cfg).map_err(|e| JsError::new(&e.to_string()))
}

/// Run a scenario from a JSON config.
#[wasm_bindgen(js_name = runScenario)]
pub fn run_scenario(name: &str, config_json: &str) -> Result<DemoRun, JsError> {
    run_json(name, config_json).map_err(|e| JsError::new(&e))
}
