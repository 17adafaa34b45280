//! File formats: density CSVs, JSON summaries, and raw complex arrays
//! with JSON sidecars.
//!
//! Binary arrays are little-endian `f64` pairs `(re, im)` in row-major
//! order, no header.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::densities::{total, DensityField};
use crate::error::{Error, Result};
use crate::fields::{Boundary, ConfigField, SpatialGrid, Symmetry};
use crate::propagators::{PropagatorKind, PropagatorMatrix, CONVENTION};

/// Which parts of a complex density to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvParts {
    #[default]
    Both,
    RealOnly,
}

/// Rows `t,x,re,im` (or `t,x,re`) for every node of every field.
pub fn write_density_csv<W: Write>(out: W, fields: &[DensityField], parts: CsvParts) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match parts {
        CsvParts::Both => w.write_record(["t", "x", "re", "im"])?,
        CsvParts::RealOnly => w.write_record(["t", "x", "re"])?,
    }
    for f in fields {
        let t = f.time().to_string();
        for (x, v) in f.grid().coordinates().iter().zip(f.values()) {
            let x = x.to_string();
            match parts {
                CsvParts::Both => w.write_record([t.as_str(), x.as_str(), &v.re.to_string(), &v.im.to_string()])?,
                CsvParts::RealOnly => w.write_record([t.as_str(), x.as_str(), &v.re.to_string()])?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct DensityRow {
    pub t: f64,
    pub x: f64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

pub fn read_density_csv(path: &Path) -> Result<Vec<DensityRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub quantity: String,
    #[serde(rename = "A")]
    pub amplitude: [f64; 2],
    pub total: [f64; 2],
    pub t: f64,
}

impl DensitySummary {
    pub fn of(d: &DensityField) -> Self {
        let a = d.amplitude();
        let q = total(d);
        Self {
            quantity: d.quantity().to_string(),
            amplitude: [a.re, a.im],
            total: [q.re, q.im],
            t: d.time(),
        }
    }
}

pub fn write_complex_bin(path: &Path, values: impl IntoIterator<Item = Complex64>) -> Result<()> {
    let mut bytes = Vec::new();
    for v in values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_complex_bin(path: &Path) -> Result<Vec<Complex64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 16 != 0 {
        return Err(Error::InvalidConfig(format!(
            "{} bytes is not a whole number of complex values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect())
}

/// `foo.bin` -> `foo.json`.
pub fn sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

fn default_origin() -> f64 {
    0.0
}

fn default_boundary() -> Boundary {
    Boundary::HardWall
}

fn default_particles() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFieldSidecar {
    pub n_points: usize,
    pub dx: f64,
    pub symmetry: Symmetry,
    pub time: f64,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_origin")]
    pub origin: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

pub fn write_config_field(bin: &Path, field: &ConfigField) -> Result<()> {
    write_complex_bin(bin, field.values().iter().copied())?;
    let g = field.grid();
    let side = ConfigFieldSidecar {
        n_points: g.n_points(),
        dx: g.dx(),
        symmetry: field.symmetry(),
        time: field.time(),
        particles: field.particles(),
        origin: g.origin(),
        boundary: g.boundary(),
    };
    fs::write(sidecar_path(bin), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_config_field(bin: &Path) -> Result<ConfigField> {
    let side: ConfigFieldSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(bin))?)?;
    let grid = SpatialGrid::new(side.n_points, side.dx, side.origin, side.boundary)?;
    ConfigField::new(grid, side.particles, read_complex_bin(bin)?, side.time, side.symmetry)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorSidecar {
    pub t_from: f64,
    pub t_to: f64,
    pub n_points: usize,
    pub dx: f64,
    pub convention: String,
    #[serde(default = "default_origin")]
    pub origin: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub advanced: bool,
}

pub fn write_propagator(bin: &Path, p: &PropagatorMatrix) -> Result<()> {
    let m = p.matrix();
    let n = m.nrows();
    write_complex_bin(bin, (0..n).flat_map(|r| (0..n).map(move |c| m[(r, c)])))?;
    let g = p.grid();
    let side = PropagatorSidecar {
        t_from: p.t_from(),
        t_to: p.t_to(),
        n_points: n,
        dx: g.dx(),
        convention: CONVENTION.to_string(),
        origin: g.origin(),
        boundary: g.boundary(),
        advanced: p.kind() == PropagatorKind::Advanced,
    };
    fs::write(sidecar_path(bin), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_propagator(bin: &Path) -> Result<PropagatorMatrix> {
    let side: PropagatorSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(bin))?)?;
    if side.convention != CONVENTION {
        return Err(Error::InvalidConfig(format!("unknown convention {:?}", side.convention)));
    }
    let grid = SpatialGrid::new(side.n_points, side.dx, side.origin, side.boundary)?;
    let values = read_complex_bin(bin)?;
    let n = side.n_points;
    if values.len() != n * n {
        return Err(Error::LengthMismatch {
            expected: n * n,
            got: values.len(),
        });
    }
    let kind = if side.advanced { PropagatorKind::Advanced } else { PropagatorKind::Retarded };
    PropagatorMatrix::from_parts(grid, DMatrix::from_row_slice(n, n, &values), side.t_from, side.t_to, kind)
}
