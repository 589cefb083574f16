use serde::{Deserialize, Serialize};

/// Ideal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.3144621;
/// Molar mass of dry air, kg/mol.
pub const MOLAR_MASS_AIR: f64 = 0.0289652;
/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Isothermal atmosphere. Temperature is constant for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereModel {
    /// Pa
    pub sea_level_pressure: f64,
    /// K
    pub temperature: f64,
    pub gas_constant: f64,
    pub molar_mass: f64,
    pub gravity: f64,
}

impl Default for AtmosphereModel {
    fn default() -> Self {
        Self {
            sea_level_pressure: 101_325.0,
            temperature: 288.15,
            gas_constant: GAS_CONSTANT,
            molar_mass: MOLAR_MASS_AIR,
            gravity: GRAVITY,
        }
    }
}

impl AtmosphereModel {
    /// Standard constants with a custom sea-level pressure and temperature.
    /// Returns `None` unless both are strictly positive and finite.
    pub fn new(sea_level_pressure: f64, temperature: f64) -> Option<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        (ok(sea_level_pressure) && ok(temperature)).then(|| Self {
            sea_level_pressure,
            temperature,
            ..Self::default()
        })
    }

    /// Barometric pressure at `altitude` (m); negative altitudes clamp to 0.
    pub fn pressure(&self, altitude: f64) -> f64 {
        let h = altitude.max(0.0);
        let scale = self.molar_mass * self.gravity / (self.gas_constant * self.temperature);
        self.sea_level_pressure * (-scale * h).exp()
    }

    /// Air density, kg/m³.
    pub fn density(&self, altitude: f64) -> f64 {
        self.pressure(altitude) * self.molar_mass / (self.gas_constant * self.temperature)
    }
}

/// Air density at `altitude` for the given atmosphere.
pub fn air_density(altitude: f64, atmo: &AtmosphereModel) -> f64 {
    atmo.density(altitude)
}
