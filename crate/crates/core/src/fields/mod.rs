//! Grids, complex fields, inner products, and boundary-state factories.

mod config_space;
mod grid;
mod states;
mod wave;

pub use config_space::{ConfigField, Symmetry, TwoParticleField, MAX_PARTICLES};
pub(crate) use config_space::{ravel, unravel};
pub use grid::{Boundary, SpatialGrid, MIN_POINTS};
pub use states::{
    make_gaussian, make_narrow_peak, make_plane_wave, mode_wavenumber, random_field, slit_mask,
    BOUNDARY_TAIL, NARROW_PEAK_CELLS,
};
pub use wave::{apply_mask, inner_product, weighted_spread, WaveField, TIME_TOLERANCE};
pub(crate) use wave::raw_inner;
