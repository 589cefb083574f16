use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3};
use serde::{Deserialize, Serialize};

use crate::Vec3;

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Roll φ, pitch θ, yaw ψ in radians.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Euler {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl Euler {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }.normalized()
    }

    /// Roll and yaw wrapped to (−π, π], pitch clamped to [−π/2, π/2].
    pub fn normalized(self) -> Self {
        Self {
            roll: wrap_angle(self.roll),
            pitch: self.pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            yaw: wrap_angle(self.yaw),
        }
    }

    /// Body-to-world rotation; its columns are the body X, Y and Z axes.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sr, cr) = self.roll.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let forward = Vec3::new(cp * sy, sp, cp * cy);
        let level_right = Vec3::new(cy, 0.0, -sy);
        let level_up = Vec3::new(-sy * sp, cp, -cy * sp);
        let up = level_up * cr + level_right * sr;
        let right = level_right * cr - level_up * sr;
        Matrix3::from_columns(&[right, up, forward])
    }

    /// Inverse of [`Euler::rotation`].
    pub fn from_rotation(m: &Matrix3<f64>) -> Self {
        let forward = m.column(2);
        let pitch = forward.y.clamp(-1.0, 1.0).asin();
        let horizontal = forward.x.hypot(forward.z);
        let (roll, yaw) = if horizontal > 1e-12 {
            let yaw = forward.x.atan2(forward.z);
            let roll = (-m[(1, 0)]).atan2(m[(1, 1)]);
            (roll, yaw)
        } else {
            // Nose vertical: fold the whole bank into yaw.
            let up = m.column(1);
            let yaw = if pitch > 0.0 {
                (-up.x).atan2(-up.z)
            } else {
                up.x.atan2(up.z)
            };
            (0.0, yaw)
        };
        Self { roll, pitch, yaw }.normalized()
    }
}

/// Kinematic state of any machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    /// m, world frame
    pub position: Vec3,
    pub orientation: Euler,
    /// m/s, world frame
    pub linear_velocity: Vec3,
    /// rad/s, body frame (pitch, yaw, roll rates)
    pub angular_velocity: Vec3,
    pub mass: f64,
}

impl Default for BodyState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            orientation: Euler::default(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            mass: 1.0,
        }
    }
}

impl BodyState {
    /// Level flight at `speed` along `heading`.
    pub fn level(position: Vec3, heading: f64, speed: f64) -> Self {
        let orientation = Euler::new(0.0, 0.0, heading);
        Self {
            position,
            orientation,
            linear_velocity: orientation.rotation().column(2) * speed,
            ..Self::default()
        }
    }

    pub fn altitude(&self) -> f64 {
        self.position.y
    }

    pub fn speed(&self) -> f64 {
        self.linear_velocity.norm()
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.orientation.rotation()
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation().column(2).into_owned()
    }

    pub fn up(&self) -> Vec3 {
        self.rotation().column(1).into_owned()
    }

    pub fn right(&self) -> Vec3 {
        self.rotation().column(0).into_owned()
    }

    /// Linear velocity expressed in body axes.
    pub fn velocity_body(&self) -> Vec3 {
        self.rotation().transpose() * self.linear_velocity
    }

    /// Rotates the body by its angular velocity over `dt`.
    pub(crate) fn rotated(&self, dt: f64) -> Euler {
        let w = self.angular_velocity;
        // Pilot sign semantics to a right-handed body rotation vector.
        let axis_angle = Vec3::new(-w.x, w.y, -w.z) * dt;
        let delta = Rotation3::new(axis_angle);
        let m = self.rotation() * delta.matrix();
        Euler::from_rotation(&m)
    }
}
