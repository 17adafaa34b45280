//! Two-boundary density fields for one-dimensional Schrodinger dynamics.
//!
//! An initial wavefunction evolved forward from `t1` and a final
//! wavefunction evolved backward from `t2` are combined into complex
//! density fields `(1/A) conj(psi_f) Q psi_i`, normalized by the amplitude
//! `A = <psi_f|psi_i>`. The crate computes these densities both from
//! evolved wavefunctions and from explicit propagator matrices, checks the
//! conservation laws they obey, and scripts a handful of scenarios
//! (two position measurements, slits, Stern-Gerlach branching).
//!
//! Units are natural (`hbar = m = 1`) throughout.

pub mod error;
pub mod evolution;
pub mod fields;
pub mod io;
pub mod checks;
pub mod conservation;
pub mod densities;
pub mod multibody;
pub mod operators;
pub mod propagators;
pub mod scenarios;

pub use error::{Error, Result};
pub use num_complex::Complex64;
