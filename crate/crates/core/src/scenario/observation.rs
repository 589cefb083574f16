use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::physics::BodyState;
use crate::Vec3;

/// Number of scalar signals in an observation.
pub const OBSERVATION_SIZE: usize = 13;

/// What an agent sees each step. Serialized as a flat array of
/// [`OBSERVATION_SIZE`] numbers in field order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// goal − position, m
    pub goal_delta: Vec3,
    /// roll, pitch, yaw, rad
    pub euler: Vec3,
    pub v_horizontal: f64,
    pub v_vertical: f64,
    /// Yaw folded into [0, 2π).
    pub heading: f64,
    pub pitch_attitude: f64,
    /// Finite-difference acceleration over the last tick, m/s²
    pub acceleration: Vec3,
}

impl Observation {
    pub fn to_array(&self) -> [f64; OBSERVATION_SIZE] {
        let g = &self.goal_delta;
        let e = &self.euler;
        let a = &self.acceleration;
        [
            g.x,
            g.y,
            g.z,
            e.x,
            e.y,
            e.z,
            self.v_horizontal,
            self.v_vertical,
            self.heading,
            self.pitch_attitude,
            a.x,
            a.y,
            a.z,
        ]
    }

    pub fn from_array(v: &[f64; OBSERVATION_SIZE]) -> Self {
        Self {
            goal_delta: Vec3::new(v[0], v[1], v[2]),
            euler: Vec3::new(v[3], v[4], v[5]),
            v_horizontal: v[6],
            v_vertical: v[7],
            heading: v[8],
            pitch_attitude: v[9],
            acceleration: Vec3::new(v[10], v[11], v[12]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

impl Serialize for Observation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Observation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; OBSERVATION_SIZE]>::deserialize(d)?;
        Ok(Self::from_array(&v))
    }
}

pub fn compute_observation(body: &BodyState, goal: &Vec3, prev_velocity: &Vec3, dt: f64) -> Observation {
    debug_assert!(dt > 0.0);
    let o = &body.orientation;
    let v = &body.linear_velocity;
    let heading = o.yaw.rem_euclid(TAU);
    Observation {
        goal_delta: goal - body.position,
        euler: Vec3::new(o.roll, o.pitch, o.yaw),
        v_horizontal: v.x.hypot(v.z),
        v_vertical: v.y,
        // rem_euclid can round up to exactly TAU for tiny negative inputs.
        heading: if heading >= TAU { 0.0 } else { heading },
        pitch_attitude: o.pitch,
        acceleration: (v - prev_velocity) / dt,
    }
}
