//! Locking, missile launch and guidance, damage and guns.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Aircraft, Catalog, MachineId, Missile, MissileSpec};
use crate::physics::{BodyState, Euler, FORCE_UNIT};
use crate::Vec3;

/// Lock range, m.
pub const LOCK_RANGE: f64 = 3000.0;
/// Lock cone half-angle, rad (15°).
pub const LOCK_HALF_ANGLE: f64 = 15.0 * std::f64::consts::PI / 180.0;
/// Proximity fuse radius, m.
pub const PROXIMITY_RADIUS: f64 = 20.0;
/// Gun range, m.
pub const GUN_RANGE: f64 = 1000.0;
/// Gun cone half-angle, rad (2°).
pub const GUN_HALF_ANGLE: f64 = 2.0 * std::f64::consts::PI / 180.0;
/// Gun damage per second on target.
pub const GUN_DAMAGE_PER_SECOND: f64 = 25.0;
/// Most missiles that may chase one aircraft at once.
pub const MAX_INBOUND_MISSILES: usize = 3;
/// Quadratic missile drag coefficient, 1/m.
pub const MISSILE_DRAG: f64 = 1.5e-4;
/// Missile lateral acceleration limit is `gain · angular_frictions · v²`.
pub const MISSILE_TURN_GAIN: f64 = 4.0;
/// Float slack when deciding that a missile's endurance has run out.
pub const ENDURANCE_EPSILON: f64 = 1e-9;

/// True when `point` is strictly inside the cone of `half_angle` around the
/// body's forward axis and strictly closer than `range`.
pub fn within_cone(body: &BodyState, point: &Vec3, range: f64, half_angle: f64) -> bool {
    let offset = point - body.position;
    let distance = offset.norm();
    if distance <= 0.0 || distance >= range {
        return false;
    }
    let cos = (body.forward().dot(&offset) / distance).clamp(-1.0, 1.0);
    cos.acos() < half_angle
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockResult {
    Locked,
    NotLocked,
}

/// Lock test for one candidate.
pub fn try_lock(shooter: &Aircraft, candidate: &Aircraft) -> LockResult {
    let ok = shooter.alive
        && candidate.alive
        && shooter.is_hostile_to(candidate)
        && within_cone(&shooter.body, &candidate.body.position, LOCK_RANGE, LOCK_HALF_ANGLE);
    if ok {
        LockResult::Locked
    } else {
        LockResult::NotLocked
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FireRefusal {
    #[error("shooter is down")]
    ShooterDown,
    #[error("no target locked")]
    NoLock,
    #[error("missile inventory empty")]
    EmptyInventory,
    #[error("target already has the maximum number of inbound missiles")]
    InboundLimit,
}

/// Launches the next loadout missile at the locked target. `inbound` is the
/// number of active missiles already chasing that target.
pub fn fire_missile(
    shooter: &mut Aircraft,
    inbound: usize,
    id: MachineId,
    catalog: &Catalog,
) -> Result<Missile, FireRefusal> {
    if !shooter.alive {
        return Err(FireRefusal::ShooterDown);
    }
    let target = shooter.locked_target.ok_or(FireRefusal::NoLock)?;
    let slot = shooter.next_loadout_slot().ok_or(FireRefusal::EmptyInventory)?;
    if inbound >= MAX_INBOUND_MISSILES {
        return Err(FireRefusal::InboundLimit);
    }
    let name = shooter.spec.missile_loadout[slot].missile.clone();
    let spec = catalog
        .missile(&name)
        .expect("catalog validated every loadout entry")
        .clone();
    shooter.missiles_remaining[slot] -= 1;
    let body = BodyState {
        orientation: Euler::new(0.0, shooter.body.orientation.pitch, shooter.body.orientation.yaw),
        angular_velocity: Vec3::zeros(),
        mass: 1.0,
        ..shooter.body
    };
    Ok(Missile::new(id, spec, name, body, target, Some(shooter.id)))
}

/// Rotates unit vector `from` toward unit vector `to` by at most `max_angle`.
fn turn_toward(from: &Vec3, to: &Vec3, max_angle: f64) -> Vec3 {
    let cos = from.dot(to).clamp(-1.0, 1.0);
    let angle = cos.acos();
    if angle <= max_angle {
        return *to;
    }
    let mut perp = to - from * cos;
    if perp.norm() < 1e-12 {
        // Target straight behind: pick a deterministic side.
        perp = from.cross(&Vec3::y());
        if perp.norm() < 1e-12 {
            perp = from.cross(&Vec3::x());
        }
    }
    let perp = perp.normalize();
    (from * max_angle.cos() + perp * max_angle.sin()).normalize()
}

/// Pure-pursuit guidance for one tick. The velocity turns toward the
/// target's current position at a rate bounded by the missile's angular
/// friction while thrust works against quadratic drag. A missile whose
/// endurance is spent goes inert.
pub fn missile_guidance_step(missile: &Missile, target: &BodyState, dt: f64) -> Missile {
    let mut next = missile.clone();
    if !missile.active {
        return next;
    }
    let body = &missile.body;
    let speed = body.speed();
    let heading = if speed > 0.0 {
        body.linear_velocity / speed
    } else {
        body.forward()
    };
    let line_of_sight = target.position - body.position;
    let wanted = if line_of_sight.norm() > 0.0 {
        line_of_sight.normalize()
    } else {
        heading
    };
    let max_turn = MISSILE_TURN_GAIN * missile.spec.angular_frictions * speed * dt;
    let direction = turn_toward(&heading, &wanted, max_turn);
    let accel = missile.spec.thrust_force * FORCE_UNIT - MISSILE_DRAG * speed * speed;
    let new_speed = (speed + accel * dt).max(0.0);

    next.body.linear_velocity = direction * new_speed;
    next.body.position = body.position + next.body.linear_velocity * dt;
    next.body.orientation = Euler::new(0.0, direction.y.clamp(-1.0, 1.0).asin(), direction.x.atan2(direction.z));
    next.body.angular_velocity = Vec3::zeros();
    next.endurance_remaining = missile.endurance_remaining - dt;
    next.flight_time = missile.flight_time + dt;
    if next.endurance_remaining <= ENDURANCE_EPSILON {
        next.active = false;
    }
    next
}

/// Smallest distance between two points moving linearly over one tick.
pub fn closest_approach(a0: &Vec3, a1: &Vec3, b0: &Vec3, b1: &Vec3) -> f64 {
    let r0 = a0 - b0;
    let dr = (a1 - b1) - r0;
    let len2 = dr.norm_squared();
    let t = if len2 > 0.0 {
        (-r0.dot(&dr) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (r0 + dr * t).norm()
}

/// Draws missile damage and applies it. Returns the damage dealt.
pub fn apply_damage<R: Rng + ?Sized>(target: &mut Aircraft, spec: &MissileSpec, rng: &mut R) -> f64 {
    let (lo, hi) = spec.damage;
    let damage = if lo == hi { lo } else { rng.gen_range(lo..=hi) } as f64;
    target.health = (target.health - damage).max(0.0);
    target.refresh_alive();
    damage
}

/// Gun damage one tick of trigger would deal to `target`, if any.
pub fn gun_damage(shooter: &Aircraft, target: &Aircraft, dt: f64) -> Option<f64> {
    let hit = shooter.alive
        && target.alive
        && shooter.is_hostile_to(target)
        && within_cone(&shooter.body, &target.body.position, GUN_RANGE, GUN_HALF_ANGLE);
    hit.then_some(GUN_DAMAGE_PER_SECOND * dt)
}
