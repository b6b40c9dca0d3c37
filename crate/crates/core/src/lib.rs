//! Periodic orbits of time-dependent planar Stark-Zeeman systems, regularized
//! by blowing up the loop space with the complex squaring map.
//!
//! Loops `z` are critical points of the blown-up functional
//! `F(z) = 2||z||^2||z'||^2 + A(z) + 1/||z||^2 - E(z)`, which agrees with the
//! classical Lagrangian action of `q = z^2 o tau_z` wherever `z` has no zeros.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod field;
pub mod loops;
pub mod reparam;
pub mod solver;
mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use field::{eval_field, gauge_consistency, make_preset, FieldModel, FieldSample, PresetConfig};
pub use loops::{HalfInt, Interpolant, Loop, Parity};
pub use reparam::{collision_report, invert_time, sigma_map, time_map, Collision, ReparamTable};
