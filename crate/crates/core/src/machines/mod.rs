//! Aircraft and missiles: data-driven specs, health, locking, launches,
//! guidance and guns.

mod entity;
mod spec;
pub mod weapons;

pub use entity::{Aircraft, CustomPhysics, MachineId, Missile, Team, MAX_HEALTH};
pub use spec::{load_specs, AeroTuning, AircraftSpec, Catalog, LoadoutEntry, MissileCategory, MissileSpec, SpecError};
pub use weapons::{apply_damage, fire_missile, gun_damage, missile_guidance_step, try_lock, FireRefusal, LockResult};
