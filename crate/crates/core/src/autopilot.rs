//! Scripted pilots: a heading/altitude/thrust hold, the combat bot and a
//! waypoint navigator.
//!
//! All three steer the same way. A desired flight direction is turned into a
//! nose-pointing error in body axes; elevator and rudder null that error
//! while the ailerons bank into the turn so the elevator does the turning.

use serde::{Deserialize, Serialize};

use crate::machines::weapons::{GUN_HALF_ANGLE, GUN_RANGE, LOCK_RANGE};
use crate::machines::Aircraft;
use crate::physics::{wrap_angle, BodyState, ControlInput};
use crate::world::Triggers;
use crate::Vec3;

/// Below this enemy altitude the combat bot stops following it down.
pub const LOW_ALTITUDE_LIMIT: f64 = 500.0;
/// Altitude the combat bot climbs to when the enemy is low.
pub const SAFE_CLIMB_ALTITUDE: f64 = 2000.0;
/// Minimum time between two missile launches by the combat bot, s.
pub const MISSILE_COOLDOWN: f64 = 10.0;
/// Cruise thrust used by the navigator.
pub const CRUISE_THRUST: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombatPhase {
    HeadToTarget,
    Climb,
    Engage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutopilotState {
    /// rad, same convention as yaw
    pub target_heading: f64,
    /// m
    pub target_altitude: f64,
    pub target_thrust: f64,
    pub combat_phase: CombatPhase,
    /// s
    pub missile_cooldown_remaining: f64,
}

impl AutopilotState {
    /// Holds the current heading and altitude.
    pub fn holding(body: &BodyState, thrust: f64) -> Self {
        Self {
            target_heading: body.orientation.yaw,
            target_altitude: body.altitude(),
            target_thrust: thrust,
            combat_phase: CombatPhase::HeadToTarget,
            missile_cooldown_remaining: 0.0,
        }
    }
}

/// Controller gains. The defaults are tuned for the shipped airframes at
/// 150 to 350 m/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    /// Bank command per radian of heading error.
    pub bank_per_heading: f64,
    pub max_bank: f64,
    /// Roll level per radian of bank error.
    pub roll: f64,
    /// Elevator level per radian of nose error.
    pub pitch: f64,
    /// Rudder level per radian of nose error.
    pub yaw: f64,
    /// Flight-path command per metre of altitude error.
    pub climb_per_metre: f64,
    pub max_climb: f64,
    /// Largest heading step fed to the nose-pointing loop, rad.
    pub heading_lead: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            bank_per_heading: 3.0,
            max_bank: 75f64.to_radians(),
            roll: 3.0,
            pitch: 6.0,
            yaw: 2.0,
            climb_per_metre: 0.002,
            max_climb: 25f64.to_radians(),
            heading_lead: 30f64.to_radians(),
        }
    }
}

/// Horizontal bearing from `from` to `to`, in yaw convention.
pub fn bearing(from: &Vec3, to: &Vec3) -> f64 {
    let d = to - from;
    d.x.atan2(d.z)
}

/// Heading of the velocity vector, falling back to the nose when slow.
fn track(body: &BodyState) -> f64 {
    let v = body.linear_velocity;
    if v.x.hypot(v.z) > 1.0 {
        v.x.atan2(v.z)
    } else {
        body.orientation.yaw
    }
}

/// Flies toward `heading` with flight-path angle `climb` at `thrust`.
pub fn steer(body: &BodyState, heading: f64, climb: f64, thrust: f64, gains: &Gains) -> ControlInput {
    let heading_error = wrap_angle(heading - track(body));
    let lead = heading_error.clamp(-gains.heading_lead, gains.heading_lead);
    let carrot_heading = track(body) + lead;
    let wanted = Vec3::new(
        climb.cos() * carrot_heading.sin(),
        climb.sin(),
        climb.cos() * carrot_heading.cos(),
    );
    let local = body.rotation().transpose() * wanted;
    let pitch_error = local.y.atan2(local.z);
    let yaw_error = local.x.atan2(local.z);

    let bank = (gains.bank_per_heading * heading_error).clamp(-gains.max_bank, gains.max_bank);
    let roll_error = wrap_angle(bank - body.orientation.roll);

    ControlInput {
        pitch_level: gains.pitch * pitch_error,
        yaw_level: gains.yaw * yaw_error,
        roll_level: gains.roll * roll_error,
        thrust_level: thrust,
        ..ControlInput::default()
    }
    .clamped()
}

/// Heading, altitude and thrust hold.
pub fn hold_step(state: &AutopilotState, body: &BodyState, dt: f64) -> ControlInput {
    let _ = dt;
    let gains = Gains::default();
    let climb =
        (gains.climb_per_metre * (state.target_altitude - body.altitude())).clamp(-gains.max_climb, gains.max_climb);
    steer(body, state.target_heading, climb, state.target_thrust, &gains)
}

/// One tick of the combat bot against `enemy`. Returns the controls and the
/// trigger decisions, and advances the bot's own state.
pub fn combat_policy_step(
    me: &Aircraft,
    enemy: &Aircraft,
    ap: &mut AutopilotState,
    dt: f64,
) -> (ControlInput, Triggers) {
    ap.missile_cooldown_remaining = (ap.missile_cooldown_remaining - dt).max(0.0);
    ap.target_thrust = 1.0;

    // 1. Head to the target.
    ap.target_heading = bearing(&me.body.position, &enemy.body.position);
    // 2-3. Follow its altitude unless that would take us too low.
    let enemy_altitude = enemy.body.altitude();
    let offset = enemy.body.position - me.body.position;
    let distance = offset.norm();
    if enemy_altitude < LOW_ALTITUDE_LIMIT {
        ap.combat_phase = CombatPhase::Climb;
        ap.target_altitude = SAFE_CLIMB_ALTITUDE;
    } else {
        ap.combat_phase = if distance < LOCK_RANGE {
            CombatPhase::Engage
        } else {
            CombatPhase::HeadToTarget
        };
        ap.target_altitude = enemy_altitude;
    }

    let gains = Gains::default();
    let controls = if ap.combat_phase == CombatPhase::Climb {
        hold_step(ap, &me.body, dt)
    } else {
        // Point at the enemy in three dimensions.
        let climb = offset
            .y
            .atan2(offset.x.hypot(offset.z))
            .clamp(-gains.max_climb, gains.max_climb);
        let floor = (gains.climb_per_metre * (LOW_ALTITUDE_LIMIT - me.body.altitude())).max(-gains.max_climb);
        steer(&me.body, ap.target_heading, climb.max(floor), ap.target_thrust, &gains)
    };

    // 4. Guns when close and aligned.
    let aligned = distance > 0.0 && me.body.forward().dot(&offset) / distance > GUN_HALF_ANGLE.cos();
    let gun = distance < GUN_RANGE && aligned;
    // 5-6. Missile on lock, spaced by the cooldown.
    let missile = me.locked_target == Some(enemy.id) && ap.missile_cooldown_remaining <= 0.0;
    if missile {
        ap.missile_cooldown_remaining = MISSILE_COOLDOWN;
    }
    (controls, Triggers { gun, missile })
}

/// Turn rate the navigator assumes when judging whether the goal can be
/// reached by turning now, rad/s. The shipped airframes manage a little more.
pub const PLANNING_TURN_RATE: f64 = 0.2;
/// Steepest flight path the navigator will fly, rad.
pub const NAV_MAX_CLIMB: f64 = 35.0 * std::f64::consts::PI / 180.0;

/// Flies toward `goal` at cruise thrust. A goal inside the circle the
/// aircraft would fly by turning toward it cannot be reached that way, so
/// the navigator flies straight on until it can.
pub fn navigation_policy_step(me: &Aircraft, goal: &Vec3, ap: &mut AutopilotState, dt: f64) -> ControlInput {
    let _ = dt;
    let gains = Gains::default();
    let body = &me.body;
    let offset = goal - body.position;
    let horizontal = offset.x.hypot(offset.z);
    let course = track(body);
    let turn = wrap_angle(bearing(&body.position, goal) - course);

    let turn_radius = body.speed().max(1.0) / PLANNING_TURN_RATE;
    let side = if turn >= 0.0 { 1.0 } else { -1.0 };
    let right = Vec3::new(course.cos(), 0.0, -course.sin());
    let centre = body.position + right * (side * turn_radius);
    let inside_turn = turn.abs() > 0.3 && (goal - centre).xz().norm() < turn_radius;

    ap.target_thrust = CRUISE_THRUST;
    ap.target_altitude = goal.y;
    ap.target_heading = if inside_turn { course } else { course + turn };
    let climb = offset.y.atan2(horizontal).clamp(-NAV_MAX_CLIMB, NAV_MAX_CLIMB);
    steer(body, ap.target_heading, climb, ap.target_thrust, &gains)
}
