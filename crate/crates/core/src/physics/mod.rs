//! Simplified aerodynamics.
//!
//! Frames: the world is Y-up with the ground plane at `y = 0`. Like the
//! original sandbox it is read as left-handed (X right, Y up, Z forward), so
//! a positive heading turns from +Z toward +X. Body axes follow the same
//! convention: X lateral (right wing), Y up, Z forward.
//!
//! Angular velocity is stored in body axes with *pilot* sign semantics:
//! `x` is pitch rate (positive nose up), `y` yaw rate (positive nose right),
//! `z` roll rate (positive right wing down).

mod atmosphere;
mod body;
mod forces;
mod integrate;
mod kinetics;

pub use atmosphere::{air_density, AtmosphereModel, GAS_CONSTANT, GRAVITY, MOLAR_MASS_AIR};
pub use body::{wrap_angle, BodyState, Euler};
pub use forces::{
    compute_forces, compute_moments, dynamic_pressure, stall_factor, AeroParams, ControlInput, ForceSet, FORCE_UNIT,
};
pub use integrate::{angular_damping_rate, integrate};
pub use kinetics::{euler_rate_matrix, KineticsError, KineticsMatrix};
