use serde::{Deserialize, Serialize};

use super::{AtmosphereModel, BodyState};
use crate::Vec3;

/// Scale from the tabulated sim force units to N per kg of machine mass.
pub const FORCE_UNIT: f64 = 1.0;

/// Aerodynamic and propulsion coefficients of one airframe.
///
/// `thrust_force`, `post_combustion_force`, `angular_frictions` and
/// `speed_ceiling_force` are the tabulated airframe values; the remaining
/// coefficients are tuned defaults shipped in the spec files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    pub thrust_force: f64,
    pub post_combustion_force: f64,
    pub angular_frictions: f64,
    /// Speed ceiling in km/h. Drives a soft quadratic drag cap.
    pub speed_ceiling_force: f64,
    /// Thrust starts decaying above this altitude (m).
    pub max_safe_altitude: f64,
    /// No thrust at or above this altitude (m).
    pub max_altitude: f64,
    pub wings_lift: f64,
    pub flaps_lift: f64,
    pub drag_coeff: f64,
    /// Extra drag per unit of flaps extension.
    pub flaps_drag: f64,
    pub wings_geometry_friction: f64,
    pub pitch_friction: f64,
    pub yaw_friction: f64,
    pub roll_friction: f64,
    /// Lift (1/s) opposing body-lateral and body-vertical airflow, which
    /// pulls the velocity vector onto the nose.
    pub alignment_gain: f64,
    /// Frontal dynamic pressure (Pa) at which the stall factor saturates.
    pub reference_dynamic_pressure: f64,
}

impl AeroParams {
    /// True when every coefficient is finite and non-negative and the
    /// altitude band is ordered.
    pub fn is_valid(&self) -> bool {
        let coeffs = [
            self.thrust_force,
            self.post_combustion_force,
            self.angular_frictions,
            self.speed_ceiling_force,
            self.wings_lift,
            self.flaps_lift,
            self.drag_coeff,
            self.flaps_drag,
            self.wings_geometry_friction,
            self.pitch_friction,
            self.yaw_friction,
            self.roll_friction,
            self.alignment_gain,
        ];
        coeffs.iter().all(|c| c.is_finite() && *c >= 0.0)
            && self.reference_dynamic_pressure > 0.0
            && self.speed_ceiling_force > 0.0
            && self.max_safe_altitude < self.max_altitude
    }

    /// Speed ceiling in m/s.
    pub fn speed_ceiling(&self) -> f64 {
        self.speed_ceiling_force / 3.6
    }

    /// Fraction of thrust available at `altitude`: 1 up to the safe altitude,
    /// linear down to 0 at the maximum altitude.
    pub fn thrust_altitude_factor(&self, altitude: f64) -> f64 {
        if altitude <= self.max_safe_altitude {
            1.0
        } else if altitude >= self.max_altitude {
            0.0
        } else {
            (self.max_altitude - altitude) / (self.max_altitude - self.max_safe_altitude)
        }
    }

    /// Magnitude of the speed-ceiling drag at `speed` (m/s). Equals the
    /// full afterburner thrust when `speed` reaches the ceiling.
    pub fn ceiling_drag(&self, speed: f64) -> f64 {
        let ratio = speed / self.speed_ceiling();
        (self.thrust_force + self.post_combustion_force) * FORCE_UNIT * ratio * ratio
    }
}

/// Pilot inputs. Levels are clamped on construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub pitch_level: f64,
    pub yaw_level: f64,
    pub roll_level: f64,
    pub thrust_level: f64,
    pub flaps_level: f64,
    pub post_combustion: bool,
}

fn clamp_finite(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(lo, hi)
    }
}

impl ControlInput {
    pub fn new(
        pitch_level: f64,
        yaw_level: f64,
        roll_level: f64,
        thrust_level: f64,
        flaps_level: f64,
        post_combustion: bool,
    ) -> Self {
        Self {
            pitch_level,
            yaw_level,
            roll_level,
            thrust_level,
            flaps_level,
            post_combustion,
        }
        .clamped()
    }

    /// Copy with every level inside its range; NaN maps to 0.
    pub fn clamped(self) -> Self {
        Self {
            pitch_level: clamp_finite(self.pitch_level, -1.0, 1.0),
            yaw_level: clamp_finite(self.yaw_level, -1.0, 1.0),
            roll_level: clamp_finite(self.roll_level, -1.0, 1.0),
            thrust_level: clamp_finite(self.thrust_level, 0.0, 1.0),
            flaps_level: clamp_finite(self.flaps_level, 0.0, 1.0),
            post_combustion: self.post_combustion,
        }
    }
}

/// Linear forces on one machine, world frame, sim force units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSet {
    pub lift: Vec3,
    pub drag: Vec3,
    pub thrust: Vec3,
    pub gravity: Vec3,
    pub total_move: Vec3,
}

impl ForceSet {
    /// Assembles the set; `total_move = thrust + lift − drag + gravity`.
    pub fn new(lift: Vec3, drag: Vec3, thrust: Vec3, gravity: Vec3) -> Self {
        let total_move = thrust + lift - drag + gravity;
        Self {
            lift,
            drag,
            thrust,
            gravity,
            total_move,
        }
    }
}

/// Per-axis dynamic pressure `ρ·vᵢ·|vᵢ|/2`, signed so direction is kept.
pub fn dynamic_pressure(density: f64, velocity_body: &Vec3) -> Vec3 {
    velocity_body.map(|v| density * v * v.abs() / 2.0)
}

/// Normalised frontal dynamic pressure in [0, 1]: 0 is a stall, 1 stable
/// forward flight at or above the reference pressure.
pub fn stall_factor(state: &BodyState, density: f64, reference_pressure: f64) -> f64 {
    let q = dynamic_pressure(density, &state.velocity_body());
    (q.z / reference_pressure).clamp(0.0, 1.0)
}

/// Thrust, lift, drag and gravity acting on an airframe.
pub fn compute_forces(
    state: &BodyState,
    controls: &ControlInput,
    params: &AeroParams,
    atmo: &AtmosphereModel,
) -> ForceSet {
    let rotation = state.rotation();
    let right = rotation.column(0).into_owned();
    let up = rotation.column(1).into_owned();
    let forward = rotation.column(2).into_owned();

    let density = atmo.density(state.altitude());
    let q_z = stall_factor(state, density, params.reference_dynamic_pressure);
    let v_body = rotation.transpose() * state.linear_velocity;

    let wing_lift = q_z * (params.wings_lift + controls.flaps_level * params.flaps_lift);
    let alignment = -q_z * params.alignment_gain * (right * v_body.x + up * v_body.y);
    let lift = (up * wing_lift + alignment) * FORCE_UNIT;

    let speed = state.speed();
    let drag = if speed > 0.0 {
        let coeff = params.drag_coeff + controls.flaps_level * params.flaps_drag + params.wings_geometry_friction;
        let magnitude = q_z * coeff * FORCE_UNIT + params.ceiling_drag(speed);
        state.linear_velocity / speed * magnitude
    } else {
        Vec3::zeros()
    };

    let mut thrust_scale = controls.thrust_level * params.thrust_force;
    if controls.post_combustion {
        thrust_scale += params.post_combustion_force;
    }
    let thrust = forward * (thrust_scale * params.thrust_altitude_factor(state.altitude()) * FORCE_UNIT);

    let gravity = Vec3::new(0.0, -state.mass * atmo.gravity, 0.0);
    ForceSet::new(lift, drag, thrust, gravity)
}

/// Control moment (pitch, yaw, roll) in body axes. All three terms carry the
/// stall factor, so a stalled airframe cannot be controlled.
pub fn compute_moments(controls: &ControlInput, params: &AeroParams, q_z: f64) -> Vec3 {
    let pitch = Vec3::x() * (q_z * controls.pitch_level * params.pitch_friction);
    let yaw = Vec3::y() * (q_z * controls.yaw_level * params.yaw_friction);
    let roll = Vec3::z() * (q_z * controls.roll_level * params.roll_friction);
    pitch + roll + yaw
}
