use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("time tags differ: {left} vs {right}")]
    TimeMismatch { left: f64, right: f64 },
    #[error("packet width {width} is not resolved by grid spacing {dx} (need width > 2*dx)")]
    UnresolvedWidth { width: f64, dx: f64 },
    #[error("operation requires a periodic grid")]
    NonPeriodicGrid,
    #[error("mode index {mode} out of range for {n_points} points")]
    ModeOutOfRange { mode: i64, n_points: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("implicit Crank-Nicolson system is numerically singular")]
    SingularSolve,
    #[error("time {target} is not reachable from {from} in whole steps of {dt}")]
    UnreachableTime { from: f64, target: f64, dt: f64 },
    #[error("step [{t0}, {t1}] straddles a potential segment boundary")]
    StepStraddlesSegment { t0: f64, t1: f64 },
    #[error("no potential segment covers time {0}")]
    NoSegment(f64),
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("amplitude {amplitude} is below the floor {floor}: no consistent history connects the boundary states")]
    AmplitudeNearZero { amplitude: Complex64, floor: f64 },
    #[error("field is not an eigenvector of the observable (residual {residual:e})")]
    NotAnEigenvector { residual: f64 },
    #[error("symmetry mode mismatch: {0}")]
    SymmetryModeMismatch(String),
    #[error("time ordering violated: {0}")]
    TimeOrderViolation(String),
    #[error("need at least {needed} snapshots, got {got}")]
    MissingSnapshots { needed: usize, got: usize },
    #[error("propagator drifted from unitarity: defect {defect:e}")]
    UnitarityDrift { defect: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
