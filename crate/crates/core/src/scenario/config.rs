use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machines::Catalog;
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("scenario is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DogfightFormat {
    #[serde(rename = "1v1")]
    OneVsOne,
    #[serde(rename = "1v2")]
    OneVsTwo,
    #[serde(rename = "2v2")]
    TwoVsTwo,
}

impl DogfightFormat {
    /// Aircraft per side, `(team 0, team 1)`.
    pub fn sides(self) -> (usize, usize) {
        match self {
            Self::OneVsOne => (1, 1),
            Self::OneVsTwo => (1, 2),
            Self::TwoVsTwo => (2, 2),
        }
    }
}

fn default_evasion_missile() -> String {
    "Mica".into()
}

fn default_launch_distance() -> f64 {
    5000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Navigation,
    Dogfight {
        format: DogfightFormat,
    },
    MissileEvasion {
        missiles: usize,
        #[serde(default = "default_evasion_missile")]
        missile: String,
        /// Horizontal distance of the launch sites from the aircraft, m.
        #[serde(default = "default_launch_distance")]
        launch_distance: f64,
    },
}

impl Mode {
    pub fn agent_count(&self) -> usize {
        match self {
            Mode::Dogfight { format } => {
                let (a, b) = format.sides();
                a + b
            }
            _ => 1,
        }
    }

    /// Length of an external action vector.
    pub fn action_arity(&self) -> usize {
        match self {
            Mode::Dogfight { .. } => 5,
            _ => 3,
        }
    }
}

/// Annulus between two centred squares plus an altitude band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnRegion {
    /// Centre of both squares in the horizontal (x, z) plane, m.
    pub center: [f64; 2],
    pub inner_half_width: f64,
    pub outer_half_width: f64,
    pub min_altitude: f64,
    pub max_altitude: f64,
    /// Initial airspeed, m/s.
    pub speed: f64,
}

impl Default for SpawnRegion {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            inner_half_width: 1500.0,
            outer_half_width: 4000.0,
            min_altitude: 1000.0,
            max_altitude: 4000.0,
            speed: 250.0,
        }
    }
}

impl SpawnRegion {
    /// True when `(x, z)` lies in the outer square but not in the inner one.
    pub fn contains_horizontal(&self, x: f64, z: f64) -> bool {
        let dx = (x - self.center[0]).abs();
        let dz = (z - self.center[1]).abs();
        let outer = dx <= self.outer_half_width && dz <= self.outer_half_width;
        let inner = dx < self.inner_half_width && dz < self.inner_half_width;
        outer && !inner
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSpec {
    /// Reward per metre of distance to the goal (applied negatively).
    pub distance_scale: f64,
    pub goal_bonus: f64,
    pub failure_penalty: f64,
    /// m
    pub goal_radius: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            distance_scale: 1e-5,
            goal_bonus: 100.0,
            failure_penalty: -100.0,
            goal_radius: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Controller {
    External,
    AutopilotCombat,
    AutopilotNavigate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub slot: usize,
    pub controller: Controller,
    /// Airframe; the scenario default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aircraft: Option<String>,
}

fn default_aircraft() -> String {
    "F16".into()
}

fn default_thrust() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    #[serde(default)]
    pub spawn_region: SpawnRegion,
    pub goal: [f64; 3],
    pub episode_max_steps: u64,
    pub dt: f64,
    pub seed: u64,
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub reward: RewardSpec,
    #[serde(default = "default_aircraft")]
    pub aircraft: String,
    /// Throttle applied to externally controlled aircraft.
    #[serde(default = "default_thrust")]
    pub external_thrust: f64,
}

impl ScenarioConfig {
    fn base(mode: Mode, agents: Vec<AgentConfig>, seed: u64) -> Self {
        Self {
            mode,
            spawn_region: SpawnRegion::default(),
            goal: [0.0, 2500.0, 0.0],
            episode_max_steps: 2000,
            dt: 0.02,
            seed,
            agents,
            reward: RewardSpec::default(),
            aircraft: default_aircraft(),
            external_thrust: default_thrust(),
        }
    }

    pub fn navigation(seed: u64, controller: Controller) -> Self {
        Self::base(
            Mode::Navigation,
            vec![AgentConfig {
                slot: 0,
                controller,
                aircraft: None,
            }],
            seed,
        )
    }

    pub fn dogfight(seed: u64, format: DogfightFormat, controllers: &[Controller]) -> Self {
        let agents = controllers
            .iter()
            .enumerate()
            .map(|(slot, &controller)| AgentConfig {
                slot,
                controller,
                aircraft: None,
            })
            .collect();
        Self::base(Mode::Dogfight { format }, agents, seed)
    }

    pub fn missile_evasion(seed: u64, missiles: usize, controller: Controller) -> Self {
        Self::base(
            Mode::MissileEvasion {
                missiles,
                missile: default_evasion_missile(),
                launch_distance: default_launch_distance(),
            },
            vec![AgentConfig {
                slot: 0,
                controller,
                aircraft: None,
            }],
            seed,
        )
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn goal(&self) -> Vec3 {
        Vec3::from(self.goal)
    }

    pub fn aircraft_for(&self, slot: usize) -> &str {
        self.agents
            .iter()
            .find(|a| a.slot == slot)
            .and_then(|a| a.aircraft.as_deref())
            .unwrap_or(&self.aircraft)
    }

    pub fn validate(&self, catalog: &Catalog) -> Result<(), ConfigError> {
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.dt) {
            return Err(invalid("dt", "must be a positive number of seconds"));
        }
        if self.episode_max_steps == 0 {
            return Err(invalid("episode_max_steps", "must be at least 1"));
        }
        let s = &self.spawn_region;
        if !(finite_pos(s.inner_half_width)
            && s.inner_half_width < s.outer_half_width
            && s.outer_half_width.is_finite())
        {
            return Err(invalid(
                "spawn_region",
                "inner square must lie strictly inside the outer square",
            ));
        }
        if !(s.min_altitude > 0.0 && s.min_altitude <= s.max_altitude && s.max_altitude.is_finite()) {
            return Err(invalid("spawn_region", "altitude band must be positive and ordered"));
        }
        if !(s.speed.is_finite() && s.speed >= 0.0) {
            return Err(invalid("spawn_region", "speed must be non-negative"));
        }
        let r = &self.reward;
        if !finite_pos(r.distance_scale) {
            return Err(invalid("reward", "distance_scale must be positive"));
        }
        if !finite_pos(r.goal_radius) {
            return Err(invalid("reward", "goal_radius must be positive"));
        }
        if !self.goal.iter().all(|g| g.is_finite()) {
            return Err(invalid("goal", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.external_thrust) {
            return Err(invalid("external_thrust", "must be in [0, 1]"));
        }
        if let Mode::MissileEvasion {
            missiles,
            missile,
            launch_distance,
        } = &self.mode
        {
            if !(1..=3).contains(missiles) {
                return Err(invalid("mode", "missile evasion takes 1 to 3 missiles"));
            }
            if catalog.missile(missile).is_none() {
                return Err(invalid("mode", format!("unknown missile `{missile}`")));
            }
            if !finite_pos(*launch_distance) {
                return Err(invalid("mode", "launch_distance must be positive"));
            }
        }
        let expected = self.mode.agent_count();
        if self.agents.len() != expected {
            return Err(invalid(
                "agents",
                format!("mode needs {expected} agents, got {}", self.agents.len()),
            ));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            if agent.slot != i {
                return Err(invalid("agents", "slots must be 0, 1, 2, ... in order"));
            }
            if agent.controller == Controller::AutopilotCombat && !matches!(self.mode, Mode::Dogfight { .. }) {
                return Err(invalid("agents", "autopilot_combat needs an enemy aircraft"));
            }
        }
        for slot in 0..self.agents.len() {
            let name = self.aircraft_for(slot);
            if catalog.aircraft(name).is_none() {
                return Err(invalid("aircraft", format!("unknown aircraft `{name}`")));
            }
        }
        Ok(())
    }
}
