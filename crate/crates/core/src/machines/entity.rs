use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AircraftSpec, MissileSpec};
use crate::physics::{AeroParams, BodyState, ControlInput, KineticsMatrix};

/// Identifier shared by aircraft and missiles within one world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MachineId(pub u32);

impl fmt::Display for MachineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Team(pub u8);

pub const MAX_HEALTH: f64 = 100.0;

/// Externally driven kinetics state shared by aircraft and missiles.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CustomPhysics {
    pub enabled: bool,
    pub pending: Option<KineticsMatrix>,
}

#[derive(Debug, Clone)]
pub struct Aircraft {
    pub id: MachineId,
    pub team: Team,
    pub spec: Arc<AircraftSpec>,
    /// Flight-model coefficients derived from `spec` once at creation.
    pub params: AeroParams,
    pub body: BodyState,
    pub health: f64,
    /// Remaining count per loadout entry, in loadout order.
    pub missiles_remaining: Vec<u32>,
    /// Missiles that hit, expired or lost their target.
    pub missiles_expended: u32,
    pub locked_target: Option<MachineId>,
    pub alive: bool,
    pub controls: ControlInput,
    pub custom: CustomPhysics,
}

impl Aircraft {
    pub fn new(id: MachineId, team: Team, spec: Arc<AircraftSpec>, body: BodyState) -> Self {
        let missiles_remaining = spec.missile_loadout.iter().map(|e| e.count).collect();
        let params = spec.aero_params();
        Self {
            id,
            team,
            spec,
            params,
            body,
            health: MAX_HEALTH,
            missiles_remaining,
            missiles_expended: 0,
            locked_target: None,
            alive: true,
            controls: ControlInput::default(),
            custom: CustomPhysics::default(),
        }
    }

    pub fn missiles_left(&self) -> u32 {
        self.missiles_remaining.iter().sum()
    }

    /// Loadout index of the next missile to fire, in spec order.
    pub fn next_loadout_slot(&self) -> Option<usize> {
        self.missiles_remaining.iter().position(|&n| n > 0)
    }

    /// Re-derives `alive` from health and altitude.
    pub fn refresh_alive(&mut self) {
        self.alive = self.alive && self.health > 0.0 && self.body.altitude() > 0.0;
    }

    pub fn is_hostile_to(&self, other: &Aircraft) -> bool {
        self.team != other.team
    }
}

#[derive(Debug, Clone)]
pub struct Missile {
    pub id: MachineId,
    pub spec: Arc<MissileSpec>,
    /// Loadout name it was fired as (may be an alias).
    pub loadout_name: String,
    pub body: BodyState,
    pub target: MachineId,
    pub shooter: Option<MachineId>,
    pub endurance_remaining: f64,
    pub flight_time: f64,
    pub active: bool,
    pub custom: CustomPhysics,
}

impl Missile {
    pub fn new(
        id: MachineId,
        spec: Arc<MissileSpec>,
        loadout_name: String,
        body: BodyState,
        target: MachineId,
        shooter: Option<MachineId>,
    ) -> Self {
        let endurance_remaining = spec.endurance;
        Self {
            id,
            spec,
            loadout_name,
            body,
            target,
            shooter,
            endurance_remaining,
            flight_time: 0.0,
            active: true,
            custom: CustomPhysics::default(),
        }
    }
}
