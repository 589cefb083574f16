//! Horizon and sky geometry for a camera above a spherical planet.
//!
//! Distances along a view ray come from two models: a flat ground plane,
//! accurate while the camera is low, and the exact sphere intersection,
//! needed once altitude is a noticeable fraction of the radius. Between
//! altitude ratios 0.001 and 0.01 the two are faded linearly. The sky colour
//! helpers describe where the atmosphere's edge sits relative to the
//! horizon and how the colour beyond it changes with altitude.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius, m.
pub const EARTH_RADIUS: f64 = 6_371_000.0;
/// Default atmosphere thickness, m.
pub const DEFAULT_ATMOSPHERE_THICKNESS: f64 = 100_000.0;
/// Below this altitude/radius ratio only the planar model is used.
pub const PLANAR_RATIO: f64 = 0.001;
/// Above this altitude/radius ratio only the spherical model is used.
pub const SPHERICAL_RATIO: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("ray misses the planet (sin α·(r+h)/r = {0} > 1)")]
    NoIntersection(f64),
    #[error("invalid query: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonQuery {
    /// Camera altitude, m.
    pub h: f64,
    /// Planet radius, m.
    pub r: f64,
    /// Angle between the ray and the downward surface normal, rad.
    pub alpha: f64,
    /// Atmosphere thickness, m.
    pub atmosphere_thickness: f64,
}

impl HorizonQuery {
    pub fn new(h: f64, alpha: f64) -> Self {
        Self {
            h,
            r: EARTH_RADIUS,
            alpha,
            atmosphere_thickness: DEFAULT_ATMOSPHERE_THICKNESS,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return Err(GeometryError::Invalid("altitude must be finite and non-negative"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(GeometryError::Invalid("radius must be positive"));
        }
        if !(self.atmosphere_thickness > 0.0 && self.atmosphere_thickness.is_finite()) {
            return Err(GeometryError::Invalid("atmosphere thickness must be positive"));
        }
        if !(0.0..FRAC_PI_2).contains(&self.alpha) {
            return Err(GeometryError::Invalid("alpha must be in [0, π/2)"));
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        self.h / self.r
    }
}

/// Distance along the ray to the sphere's surface.
pub fn spherical_distance(q: &HorizonQuery) -> Result<f64, GeometryError> {
    q.validate()?;
    let outer = q.r + q.h;
    let cos_beta = q.alpha.sin() * outer / q.r;
    if cos_beta > 1.0 {
        return Err(GeometryError::NoIntersection(cos_beta));
    }
    Ok(q.alpha.cos() * outer - q.r * cos_beta.acos().sin())
}

/// Distance along the ray to a flat ground plane. Grows without bound as
/// the ray approaches the horizontal.
pub fn planar_distance(q: &HorizonQuery) -> Result<f64, GeometryError> {
    q.validate()?;
    Ok(q.h / q.alpha.cos())
}

/// Planar below [`PLANAR_RATIO`], spherical above [`SPHERICAL_RATIO`],
/// linear in the altitude ratio in between.
pub fn blended_distance(q: &HorizonQuery) -> Result<f64, GeometryError> {
    let ratio = q.ratio();
    if ratio < PLANAR_RATIO {
        return planar_distance(q);
    }
    if ratio > SPHERICAL_RATIO {
        return spherical_distance(q);
    }
    let w = (ratio - PLANAR_RATIO) / (SPHERICAL_RATIO - PLANAR_RATIO);
    let planar = planar_distance(q)?;
    let spherical = spherical_distance(q)?;
    Ok(planar + (spherical - planar) * w)
}

/// Angle between the downward normal and the horizon line, rad.
pub fn horizon_angle(h: f64, r: f64) -> f64 {
    FRAC_PI_2 - ((h * (h + 2.0 * r)).sqrt() / r).atan()
}

/// Altitude as a fraction of the atmosphere thickness.
pub fn parametric_altitude(h: f64, atmosphere_thickness: f64) -> f64 {
    h / atmosphere_thickness
}

/// Angle between the horizon line and the edge of the atmosphere, rad.
///
/// Dispatches on the parametric altitude to [`atmosphere_angle_inside`]
/// (`F ≤ 1`) or [`atmosphere_angle_above`] (`F > 1`). The two agree at
/// `F = 1`; just above it the value moves like √(h − A_t), the usual
/// infinite slope of a horizon seen from zero height.
pub fn atmosphere_angle(h: f64, r: f64, atmosphere_thickness: f64) -> f64 {
    if parametric_altitude(h, atmosphere_thickness) <= 1.0 {
        atmosphere_angle_inside(h, r, atmosphere_thickness)
    } else {
        atmosphere_angle_above(h, r, atmosphere_thickness)
    }
}

/// Inside the atmosphere the edge angle fades from π on the ground to π/2
/// at the top, measured from the camera's own horizon.
pub fn atmosphere_angle_inside(h: f64, r: f64, atmosphere_thickness: f64) -> f64 {
    let f = parametric_altitude(h, atmosphere_thickness);
    PI * (1.0 - f) + FRAC_PI_2 * f - horizon_angle(h, r)
}

/// Above the atmosphere the edge is the horizon of a sphere of radius
/// `r + A_t` seen from `h − A_t` above it, again measured from the camera's
/// own horizon `horizon_angle(h, r)`.
pub fn atmosphere_angle_above(h: f64, r: f64, atmosphere_thickness: f64) -> f64 {
    horizon_angle(h - atmosphere_thickness, r + atmosphere_thickness) - horizon_angle(h, r)
}

/// RGB with components in [0, 1].
pub type Color = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmoPalette {
    pub lower_atmosphere_color: Color,
    pub upper_atmosphere_color: Color,
    pub space_color: Color,
}

impl Default for AtmoPalette {
    fn default() -> Self {
        Self {
            lower_atmosphere_color: [0.55, 0.75, 0.95],
            upper_atmosphere_color: [0.10, 0.30, 0.80],
            space_color: [0.0, 0.0, 0.0],
        }
    }
}

impl AtmoPalette {
    pub fn is_valid(&self) -> bool {
        [
            self.lower_atmosphere_color,
            self.upper_atmosphere_color,
            self.space_color,
        ]
        .iter()
        .flatten()
        .all(|c| (0.0..=1.0).contains(c))
    }
}

/// Colour beyond the atmosphere's edge: the upper-atmosphere colour on the
/// ground, space colour from the top of the atmosphere up.
pub fn space_color(f: f64, palette: &AtmoPalette) -> Color {
    let t = f.clamp(0.0, 1.0);
    let (a, b) = (palette.upper_atmosphere_color, palette.space_color);
    if t == 1.0 {
        return b;
    }
    [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * t)
}
