//! Headless, deterministic flight-combat simulation.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`]: atmosphere, dynamic pressure, forces, moments and the
//!   fixed-step integrator, plus the custom-physics kinetics matrix.
//! * [`machines`]: aircraft and missile specs, locking, missile guidance,
//!   damage and guns.
//! * [`world`]: the set of machines owned by one environment, stepped tick
//!   by tick with a seeded RNG.
//! * [`autopilot`]: scripted heading/altitude hold, combat bot and
//!   waypoint navigation.
//! * [`scenario`]: navigation, dogfight and missile-evasion tasks with their
//!   observation, action and reward definitions.
//! * [`runtime`]: synchronous/asynchronous stepping, JSON Lines traces and
//!   bit-exact replay.
//! * [`geometry`]: horizon and atmosphere geometry (pure math).
//! * [`fleet`]: batch evaluation across many environments, parallel when the
//!   `parallel` feature is enabled.

pub mod autopilot;
pub mod fleet;
pub mod geometry;
pub mod machines;
pub mod physics;
pub mod rng;
pub mod runtime;
pub mod scenario;
pub mod world;

pub use nalgebra;

/// World-frame and body-frame 3-vectors.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Version string written into trace headers.
pub const ENGINE_VERSION: &str = concat!("dogfight-core/", env!("CARGO_PKG_VERSION"));
