use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::physics::AeroParams;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{file}: cannot read: {source}")]
    Io {
        file: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: schema violation: {source}")]
    Schema {
        file: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{file}: field `{field}`: {reason}")]
    Invariant {
        file: PathBuf,
        field: &'static str,
        reason: String,
    },
    #[error("duplicate spec name `{0}`")]
    Duplicate(String),
    #[error("unknown aircraft `{0}`")]
    UnknownAircraft(String),
    #[error("unknown missile `{0}`")]
    UnknownMissile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MissileCategory {
    #[serde(rename = "AAM")]
    AirToAir,
    #[serde(rename = "SAM")]
    SurfaceToAir,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadoutEntry {
    pub missile: String,
    pub count: u32,
}

/// Tuned coefficients that the airframe table does not provide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroTuning {
    pub wings_lift: f64,
    pub flaps_lift: f64,
    pub drag_coeff: f64,
    pub flaps_drag: f64,
    pub wings_geometry_friction: f64,
    pub pitch_friction: f64,
    pub yaw_friction: f64,
    pub roll_friction: f64,
    pub alignment_gain: f64,
    pub reference_dynamic_pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftSpec {
    pub name: String,
    pub thrust_force: f64,
    pub post_combustion_force: f64,
    pub angular_frictions: f64,
    pub speed_ceiling_force: f64,
    pub max_safe_altitude: f64,
    pub max_altitude: f64,
    #[serde(rename = "missile_number")]
    pub missile_count: u32,
    #[serde(rename = "missile_config")]
    pub missile_loadout: Vec<LoadoutEntry>,
    pub aero: AeroTuning,
}

impl AircraftSpec {
    pub fn aero_params(&self) -> AeroParams {
        let t = &self.aero;
        AeroParams {
            thrust_force: self.thrust_force,
            post_combustion_force: self.post_combustion_force,
            angular_frictions: self.angular_frictions,
            speed_ceiling_force: self.speed_ceiling_force,
            max_safe_altitude: self.max_safe_altitude,
            max_altitude: self.max_altitude,
            wings_lift: t.wings_lift,
            flaps_lift: t.flaps_lift,
            drag_coeff: t.drag_coeff,
            flaps_drag: t.flaps_drag,
            wings_geometry_friction: t.wings_geometry_friction,
            pitch_friction: t.pitch_friction,
            yaw_friction: t.yaw_friction,
            roll_friction: t.roll_friction,
            alignment_gain: t.alignment_gain,
            reference_dynamic_pressure: t.reference_dynamic_pressure,
        }
    }

    fn validate(&self, file: &Path) -> Result<(), SpecError> {
        let fail = |field, reason: String| SpecError::Invariant {
            file: file.to_path_buf(),
            field,
            reason,
        };
        let loadout: u32 = self.missile_loadout.iter().map(|e| e.count).sum();
        if loadout != self.missile_count {
            return Err(fail(
                "missile_config",
                format!("loadout sums to {loadout} but missile_number is {}", self.missile_count),
            ));
        }
        if self.max_safe_altitude >= self.max_altitude {
            return Err(fail("max_safe_altitude", "must be below max_altitude".into()));
        }
        if !self.aero_params().is_valid() {
            return Err(fail("aero", "coefficients must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissileSpec {
    pub name: String,
    pub thrust_force: f64,
    /// Powered flight time, s.
    pub endurance: f64,
    /// Inclusive damage interval in health points.
    #[serde(with = "damage_pair")]
    pub damage: (u32, u32),
    pub angular_frictions: f64,
    pub category: MissileCategory,
    /// Loadout names that fly with this missile's parameters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

mod damage_pair {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &(u32, u32), s: S) -> Result<S::Ok, S::Error> {
        if v.0 == v.1 {
            s.serialize_u32(v.0)
        } else {
            [v.0, v.1].serialize(s)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Fixed(u32),
        Range([u32; 2]),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(u32, u32), D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Fixed(v) => (v, v),
            Repr::Range([lo, hi]) => (lo, hi),
        })
    }

    use serde::Serialize;
}

impl MissileSpec {
    pub fn damage_min(&self) -> u32 {
        self.damage.0
    }

    pub fn damage_max(&self) -> u32 {
        self.damage.1
    }

    fn validate(&self, file: &Path) -> Result<(), SpecError> {
        let fail = |field, reason: String| SpecError::Invariant {
            file: file.to_path_buf(),
            field,
            reason,
        };
        let (lo, hi) = self.damage;
        if !(0 < lo && lo <= hi && hi <= 100) {
            return Err(fail("damage", format!("need 0 < min ≤ max ≤ 100, got {lo}-{hi}")));
        }
        if !(self.endurance > 0.0 && self.endurance.is_finite()) {
            return Err(fail("endurance", "must be positive".into()));
        }
        if !(self.thrust_force >= 0.0 && self.angular_frictions >= 0.0) {
            return Err(fail("thrust_force", "coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// All machine specs available to a run. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    aircraft: BTreeMap<String, Arc<AircraftSpec>>,
    missiles: BTreeMap<String, Arc<MissileSpec>>,
    aliases: BTreeMap<String, String>,
}

const BUILTIN_AIRCRAFT: &[(&str, &str)] = &[
    ("specs/aircraft/tfx.json", include_str!("../../specs/aircraft/tfx.json")),
    (
        "specs/aircraft/rafale.json",
        include_str!("../../specs/aircraft/rafale.json"),
    ),
    ("specs/aircraft/f16.json", include_str!("../../specs/aircraft/f16.json")),
    ("specs/aircraft/f14.json", include_str!("../../specs/aircraft/f14.json")),
    (
        "specs/aircraft/eurofighter.json",
        include_str!("../../specs/aircraft/eurofighter.json"),
    ),
];

const BUILTIN_MISSILES: &[(&str, &str)] = &[
    (
        "specs/missiles/mica.json",
        include_str!("../../specs/missiles/mica.json"),
    ),
    (
        "specs/missiles/karaoke.json",
        include_str!("../../specs/missiles/karaoke.json"),
    ),
    (
        "specs/missiles/sidewinder.json",
        include_str!("../../specs/missiles/sidewinder.json"),
    ),
    (
        "specs/missiles/meteor.json",
        include_str!("../../specs/missiles/meteor.json"),
    ),
    (
        "specs/missiles/aim-120.json",
        include_str!("../../specs/missiles/aim-120.json"),
    ),
    (
        "specs/missiles/s-400.json",
        include_str!("../../specs/missiles/s-400.json"),
    ),
];

fn parse<T: for<'de> Deserialize<'de>>(file: &Path, text: &str) -> Result<T, SpecError> {
    serde_json::from_str(text).map_err(|source| SpecError::Schema {
        file: file.to_path_buf(),
        source,
    })
}

impl Catalog {
    /// The shipped specs, compiled into the binary.
    pub fn builtin() -> Self {
        let mut catalog = Self::default();
        for (file, text) in BUILTIN_MISSILES {
            let spec = parse(Path::new(file), text).expect("shipped missile spec parses");
            catalog
                .add_missile(Path::new(file), spec)
                .expect("shipped missile spec is valid");
        }
        for (file, text) in BUILTIN_AIRCRAFT {
            let spec = parse(Path::new(file), text).expect("shipped aircraft spec parses");
            catalog
                .add_aircraft(Path::new(file), spec)
                .expect("shipped aircraft spec is valid");
        }
        catalog
    }

    /// Loads `<dir>/missiles/*.json` then `<dir>/aircraft/*.json`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, SpecError> {
        let dir = dir.as_ref();
        let mut catalog = Self::default();
        for path in json_files(&dir.join("missiles"))? {
            let spec = parse(&path, &read(&path)?)?;
            catalog.add_missile(&path, spec)?;
        }
        for path in json_files(&dir.join("aircraft"))? {
            let spec = parse(&path, &read(&path)?)?;
            catalog.add_aircraft(&path, spec)?;
        }
        Ok(catalog)
    }

    pub fn add_missile(&mut self, file: &Path, spec: MissileSpec) -> Result<(), SpecError> {
        spec.validate(file)?;
        if self.missiles.contains_key(&spec.name) || self.aliases.contains_key(&spec.name) {
            return Err(SpecError::Duplicate(spec.name));
        }
        for alias in &spec.aliases {
            if self.missiles.contains_key(alias) || self.aliases.insert(alias.clone(), spec.name.clone()).is_some() {
                return Err(SpecError::Duplicate(alias.clone()));
            }
        }
        self.missiles.insert(spec.name.clone(), Arc::new(spec));
        Ok(())
    }

    /// Adds an aircraft; every loadout entry must name a known missile.
    pub fn add_aircraft(&mut self, file: &Path, spec: AircraftSpec) -> Result<(), SpecError> {
        spec.validate(file)?;
        for entry in &spec.missile_loadout {
            if self.missile(&entry.missile).is_none() {
                return Err(SpecError::Invariant {
                    file: file.to_path_buf(),
                    field: "missile_config",
                    reason: format!("unknown missile `{}`", entry.missile),
                });
            }
        }
        if self.aircraft.contains_key(&spec.name) {
            return Err(SpecError::Duplicate(spec.name));
        }
        self.aircraft.insert(spec.name.clone(), Arc::new(spec));
        Ok(())
    }

    pub fn aircraft(&self, name: &str) -> Option<&Arc<AircraftSpec>> {
        self.aircraft.get(name)
    }

    /// Resolves aliases, so `CFT` yields the spec it is flagged to share.
    pub fn missile(&self, name: &str) -> Option<&Arc<MissileSpec>> {
        let name = self.aliases.get(name).map(String::as_str).unwrap_or(name);
        self.missiles.get(name)
    }

    pub fn aircraft_names(&self) -> impl Iterator<Item = &str> {
        self.aircraft.keys().map(String::as_str)
    }

    pub fn missile_names(&self) -> impl Iterator<Item = &str> {
        self.missiles.keys().map(String::as_str)
    }

    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }
}

fn read(path: &Path) -> Result<String, SpecError> {
    fs::read_to_string(path).map_err(|source| SpecError::Io {
        file: path.to_path_buf(),
        source,
    })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, SpecError> {
    let entries = fs::read_dir(dir).map_err(|source| SpecError::Io {
        file: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|source| SpecError::Io {
                file: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads the catalog in `dir`.
pub fn load_specs(dir: impl AsRef<Path>) -> Result<Catalog, SpecError> {
    Catalog::load_dir(dir)
}
