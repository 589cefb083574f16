//! Externally supplied kinetics for machines in custom physics mode.
//!
//! The update is a 4×3 matrix: the upper 3×3 block is the Euler-rate
//! transform for the current roll φ and pitch θ,
//!
//! ```text
//! [ 1   tanθ·sinφ   cosφ·tanθ ]
//! [ 0   cosφ        −sinφ     ]
//! [ 0   secθ·sinφ   secθ·cosφ ]
//! [ x   y           z         ]
//! ```
//!
//! and the last row is the machine position.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Tolerance on the consistency checks of the 3×3 block.
const BLOCK_TOLERANCE: f64 = 1e-9;
/// |cos θ| below this is treated as the sec θ singularity.
const SINGULAR_COS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticsError {
    #[error("pitch is at ±π/2: sec θ is undefined")]
    SingularPitch,
    #[error("kinetics matrix contains a non-finite entry")]
    NonFinite,
    #[error("kinetics matrix rotation block is inconsistent: {0}")]
    Inconsistent(&'static str),
}

/// Maps body rates (roll p, pitch q, yaw r) to Euler angle rates (φ̇, θ̇, ψ̇).
pub fn euler_rate_matrix(roll: f64, pitch: f64) -> Result<Matrix3<f64>, KineticsError> {
    let (sp, cp) = roll.sin_cos();
    let cos_t = pitch.cos();
    if cos_t.abs() < SINGULAR_COS {
        return Err(KineticsError::SingularPitch);
    }
    let tan_t = pitch.tan();
    let sec_t = 1.0 / cos_t;
    Ok(Matrix3::new(
        1.0,
        tan_t * sp,
        cp * tan_t,
        0.0,
        cp,
        -sp,
        0.0,
        sec_t * sp,
        sec_t * cp,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KineticsMatrix {
    pub rows: [[f64; 3]; 4],
}

impl KineticsMatrix {
    /// Builds the matrix for a pose. Fails at the pitch singularity.
    pub fn from_pose(position: Vec3, roll: f64, pitch: f64) -> Result<Self, KineticsError> {
        let block = euler_rate_matrix(roll, pitch)?;
        let mut rows = [[0.0; 3]; 4];
        for (i, row) in rows.iter_mut().take(3).enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = block[(i, j)];
            }
        }
        rows[3] = [position.x, position.y, position.z];
        Ok(Self { rows })
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.rows[3][0], self.rows[3][1], self.rows[3][2])
    }

    pub fn rate_block(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.rows[i][j])
    }

    /// Validates the matrix and extracts `(position, roll, pitch)`.
    pub fn decode(&self) -> Result<(Vec3, f64, f64), KineticsError> {
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(KineticsError::NonFinite);
        }
        let r = &self.rows;
        let close = |a: f64, b: f64| (a - b).abs() <= BLOCK_TOLERANCE * (1.0 + b.abs());
        if !(close(r[0][0], 1.0) && close(r[1][0], 0.0) && close(r[2][0], 0.0)) {
            return Err(KineticsError::Inconsistent("first column must be (1, 0, 0)"));
        }
        let (cos_roll, sin_roll) = (r[1][1], -r[1][2]);
        if !close(cos_roll.hypot(sin_roll), 1.0) {
            return Err(KineticsError::Inconsistent("row 2 is not (cos φ, −sin φ)"));
        }
        let roll = sin_roll.atan2(cos_roll);
        let tan_pitch = r[0][1] * sin_roll + r[0][2] * cos_roll;
        let sec_pitch = r[2][1] * sin_roll + r[2][2] * cos_roll;
        if sec_pitch < 1.0 - BLOCK_TOLERANCE {
            return Err(KineticsError::Inconsistent("sec θ must be ≥ 1"));
        }
        let pitch = tan_pitch.atan();
        let expected = Self::from_pose(self.position(), roll, pitch)?;
        let consistent = (0..3).all(|i| (0..3).all(|j| close(r[i][j], expected.rows[i][j])));
        if !consistent {
            return Err(KineticsError::Inconsistent("entries disagree with a single (φ, θ)"));
        }
        Ok((self.position(), roll, pitch))
    }
}
