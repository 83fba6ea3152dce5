//! Simulation and design core for four-rf-electrode surface Paul traps.
//!
//! Everything here is pure numerics over immutable inputs: planar-electrode
//! electrostatics in the gapless-plane approximation, rf pseudopotential and
//! secular-mode analysis, least-squares dc voltage solving, a lumped model of
//! the split-arm rf resonator, micromotion and trajectory integration, and
//! sideband thermometry. File formats, scenarios and the command-line runner
//! live in the `surftrap` crate.
//!
//! Units are SI throughout (meters, volts, kilograms, seconds, rad/s).
#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod constants;
pub mod dcsolve;
pub mod dynamics;
pub mod efield;
pub mod geometry;
pub mod numeric;
pub mod pseudo;
pub mod thermo;

pub use nalgebra::{Matrix3, Vector3};
pub use num_complex::Complex64;
