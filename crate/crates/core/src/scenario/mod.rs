//! Tasks built on a [`World`]: navigation to a goal, dogfights and missile
//! evasion. This layer owns spawning, the observation and action mapping,
//! rewards and episode adjudication.

mod config;
mod observation;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AgentConfig, ConfigError, Controller, DogfightFormat, Mode, RewardSpec, ScenarioConfig, SpawnRegion};
pub use observation::{compute_observation, Observation, OBSERVATION_SIZE};

use crate::autopilot::{combat_policy_step, hold_step, navigation_policy_step, AutopilotState};
use crate::machines::{Catalog, MachineId, Team};
use crate::physics::{BodyState, ControlInput, Euler};
use crate::world::{Triggers, World, WorldError, WorldEvent};
use crate::Vec3;

/// Distance between the two teams at the start of a dogfight, m.
pub const DOGFIGHT_SEPARATION: f64 = 6000.0;
/// Lateral spacing between wingmen, m.
pub const WINGMAN_SPACING: f64 = 1000.0;
/// Altitude of dogfight spawns before jitter, m.
pub const DOGFIGHT_ALTITUDE: f64 = 3000.0;
/// Speed of a surface-launched missile leaving the rail, m/s.
pub const SITE_LAUNCH_SPEED: f64 = 50.0;
/// A trigger value above this fires.
pub const TRIGGER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Crashed,
    Destroyed,
    Timeout,
    Won,
    Draw,
    Evaded,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::GoalReached | Outcome::Won | Outcome::Evaded)
    }

    /// Terminal reward added on the step this outcome is reached.
    pub fn bonus(self, reward: &RewardSpec) -> f64 {
        match self {
            Outcome::GoalReached | Outcome::Won | Outcome::Evaded => reward.goal_bonus,
            Outcome::Draw => 0.0,
            Outcome::Crashed | Outcome::Destroyed | Outcome::Timeout => reward.failure_penalty,
        }
    }
}

/// Result of one tick for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub slot: usize,
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    /// One entry per agent that was still running before the tick.
    pub results: Vec<AgentStep>,
    pub events: Vec<WorldEvent>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("environment has not been reset")]
    NotReset,
    #[error("episode is over; reset before stepping again")]
    EpisodeOver,
    #[error("expected actions for {expected} slots, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("slot {slot} action needs {expected} values, got {got}")]
    ActionArity { slot: usize, expected: usize, got: usize },
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone)]
struct AgentState {
    slot: usize,
    id: MachineId,
    team: Team,
    controller: Controller,
    autopilot: AutopilotState,
    prev_velocity: Vec3,
    outcome: Option<Outcome>,
}

/// One running task.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    catalog: Arc<Catalog>,
    world: World,
    agents: Vec<AgentState>,
    ticks: u64,
    resets: u64,
    seed: u64,
    ready: bool,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, catalog: Arc<Catalog>) -> Result<Self, ScenarioError> {
        config.validate(&catalog)?;
        let world = World::new(Arc::clone(&catalog), config.seed);
        Ok(Self {
            seed: config.seed,
            config,
            catalog,
            world,
            agents: Vec::new(),
            ticks: 0,
            resets: 0,
            ready: false,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Direct world access for the custom-physics hooks.
    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    /// Seed of the current episode.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Ticks since the last reset.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn agent_count(&self) -> usize {
        self.config.agents.len()
    }

    pub fn agent_id(&self, slot: usize) -> Option<MachineId> {
        self.agents.get(slot).map(|a| a.id)
    }

    pub fn outcome(&self, slot: usize) -> Option<Outcome> {
        self.agents.get(slot).and_then(|a| a.outcome)
    }

    pub fn is_finished(&self) -> bool {
        self.ready && self.agents.iter().all(|a| a.outcome.is_some())
    }

    /// Starts a new episode. Without an explicit seed the n-th reset uses
    /// `config.seed + n`, so the first episode runs on the configured seed.
    pub fn reset(&mut self, seed: Option<u64>) -> Vec<Observation> {
        self.seed = seed.unwrap_or_else(|| self.config.seed.wrapping_add(self.resets));
        self.resets += 1;
        self.world = World::new(Arc::clone(&self.catalog), self.seed);
        self.agents.clear();
        self.ticks = 0;
        self.ready = true;

        let bodies = self.spawn_bodies();
        let (team_a, _) = match self.config.mode {
            Mode::Dogfight { format } => format.sides(),
            _ => (1, 0),
        };
        for (slot, body) in bodies.into_iter().enumerate() {
            let team = Team(u8::from(slot >= team_a));
            let kind = self.config.aircraft_for(slot).to_owned();
            let id = self
                .world
                .spawn_aircraft(&kind, team, body)
                .expect("aircraft validated with the config");
            let controller = self.config.agents[slot].controller;
            let thrust = if controller == Controller::AutopilotCombat {
                1.0
            } else {
                self.config.external_thrust
            };
            self.agents.push(AgentState {
                slot,
                id,
                team,
                controller,
                autopilot: AutopilotState::holding(&body, thrust),
                prev_velocity: body.linear_velocity,
                outcome: None,
            });
        }
        if let Mode::MissileEvasion {
            missiles,
            ref missile,
            launch_distance,
        } = self.config.mode
        {
            let missile = missile.clone();
            self.launch_threats(missiles, &missile, launch_distance);
        }
        (0..self.agents.len()).map(|slot| self.observe(slot)).collect()
    }

    fn spawn_bodies(&mut self) -> Vec<BodyState> {
        let region = self.config.spawn_region;
        let rng = &mut self.world.rng;
        match self.config.mode {
            Mode::Dogfight { format } => {
                let (a, b) = format.sides();
                let mut out = Vec::with_capacity(a + b);
                for (count, z, heading) in [(a, -0.5, 0.0), (b, 0.5, PI)] {
                    for j in 0..count {
                        let lateral = (j as f64 - (count as f64 - 1.0) / 2.0) * WINGMAN_SPACING;
                        let x = region.center[0] + lateral + rng.gen_range(-200.0..200.0);
                        let y = DOGFIGHT_ALTITUDE + rng.gen_range(-300.0..300.0);
                        let z = region.center[1] + z * DOGFIGHT_SEPARATION;
                        out.push(BodyState::level(Vec3::new(x, y, z), heading, region.speed));
                    }
                }
                out
            }
            _ => {
                let o = region.outer_half_width;
                let (x, z) = loop {
                    let x = region.center[0] + rng.gen_range(-o..=o);
                    let z = region.center[1] + rng.gen_range(-o..=o);
                    if region.contains_horizontal(x, z) {
                        break (x, z);
                    }
                };
                let y = rng.gen_range(region.min_altitude..=region.max_altitude);
                let heading = rng.gen_range(-PI..PI);
                vec![BodyState::level(Vec3::new(x, y, z), heading, region.speed)]
            }
        }
    }

    fn launch_threats(&mut self, count: usize, missile: &str, distance: f64) {
        let target = self.agents[0].id;
        let at = self.world.aircraft[0].body.position;
        let base = self.world.rng.gen_range(0.0..TAU);
        for i in 0..count {
            let bearing = base + i as f64 * TAU / count as f64;
            let site = Vec3::new(at.x + distance * bearing.sin(), 0.0, at.z + distance * bearing.cos());
            let dir = (at - site).normalize();
            let body = BodyState {
                position: site,
                orientation: Euler::new(0.0, dir.y.asin(), dir.x.atan2(dir.z)),
                linear_velocity: dir * SITE_LAUNCH_SPEED,
                ..BodyState::default()
            };
            self.world
                .launch_from_site(missile, body, target)
                .expect("at most three threats per aircraft");
        }
    }

    /// Point the agent in `slot` is steering for: the goal, or the nearest
    /// live enemy in a dogfight.
    fn reference_point(&self, slot: usize) -> Vec3 {
        let me = &self.world.aircraft[slot];
        if matches!(self.config.mode, Mode::Dogfight { .. }) {
            if let Some(enemy) = self.nearest_enemy(slot) {
                return self.world.aircraft[enemy].body.position;
            }
            return me.body.position;
        }
        self.config.goal()
    }

    fn nearest_enemy(&self, slot: usize) -> Option<usize> {
        let me = &self.world.aircraft[slot];
        self.world
            .aircraft
            .iter()
            .enumerate()
            .filter(|(_, a)| a.alive && a.team != me.team)
            .map(|(i, a)| ((a.body.position - me.body.position).norm(), i))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|(_, i)| i)
    }

    fn observe(&self, slot: usize) -> Observation {
        let body = &self.world.aircraft[slot].body;
        compute_observation(
            body,
            &self.reference_point(slot),
            &self.agents[slot].prev_velocity,
            self.config.dt,
        )
    }

    /// Advances one tick. `actions` has one entry per slot; entries for
    /// autopilot slots are ignored and may be empty.
    pub fn tick(&mut self, actions: &[Vec<f64>]) -> Result<TickReport, ScenarioError> {
        if !self.ready {
            return Err(ScenarioError::NotReset);
        }
        if self.is_finished() {
            return Err(ScenarioError::EpisodeOver);
        }
        if actions.len() != self.agents.len() {
            return Err(ScenarioError::ActionCount {
                expected: self.agents.len(),
                got: actions.len(),
            });
        }
        let arity = self.config.mode.action_arity();
        for agent in self
            .agents
            .iter()
            .filter(|a| a.outcome.is_none() && a.controller == Controller::External)
        {
            let got = actions[agent.slot].len();
            if got != arity {
                return Err(ScenarioError::ActionArity {
                    slot: agent.slot,
                    expected: arity,
                    got,
                });
            }
        }

        let dt = self.config.dt;
        let goal = self.config.goal();
        let mut triggers = vec![Triggers::default(); self.world.aircraft.len()];
        let mut controls = Vec::with_capacity(self.agents.len());
        for slot in 0..self.agents.len() {
            let me = &self.world.aircraft[slot];
            if !me.alive || self.agents[slot].outcome.is_some() {
                controls.push(me.controls);
                continue;
            }
            let enemy = self.nearest_enemy(slot);
            let agent = &mut self.agents[slot];
            let c = match agent.controller {
                Controller::External => {
                    let a = &actions[slot];
                    if arity == 5 {
                        triggers[slot] = Triggers {
                            gun: a[3] > TRIGGER_THRESHOLD,
                            missile: a[4] > TRIGGER_THRESHOLD,
                        };
                    }
                    ControlInput {
                        yaw_level: a[0],
                        pitch_level: a[1],
                        roll_level: a[2],
                        thrust_level: self.config.external_thrust,
                        ..ControlInput::default()
                    }
                    .clamped()
                }
                Controller::AutopilotNavigate => navigation_policy_step(me, &goal, &mut agent.autopilot, dt),
                Controller::AutopilotCombat => match enemy {
                    Some(e) => {
                        let (c, t) = combat_policy_step(me, &self.world.aircraft[e], &mut agent.autopilot, dt);
                        triggers[slot] = t;
                        c
                    }
                    None => hold_step(&agent.autopilot, &me.body, dt),
                },
            };
            controls.push(c);
        }
        for (aircraft, c) in self.world.aircraft.iter_mut().zip(controls) {
            aircraft.controls = c;
        }
        for (agent, aircraft) in self.agents.iter_mut().zip(&self.world.aircraft) {
            agent.prev_velocity = aircraft.body.linear_velocity;
        }

        let events = self.world.tick(&triggers, dt);
        self.ticks += 1;

        let verdicts = self.adjudicate();
        let mut results = Vec::new();
        for (slot, &outcome) in verdicts.iter().enumerate() {
            if self.agents[slot].outcome.is_some() {
                continue;
            }
            let position = self.world.aircraft[slot].body.position;
            let distance = (position - self.reference_point(slot)).norm();
            let mut reward = -self.config.reward.distance_scale * distance;
            if let Some(o) = outcome {
                reward += o.bonus(&self.config.reward);
            }
            results.push(AgentStep {
                slot,
                observation: self.observe(slot),
                reward,
                done: outcome.is_some(),
                outcome,
            });
        }
        for r in &results {
            self.agents[r.slot].outcome = r.outcome;
        }
        Ok(TickReport { results, events })
    }

    /// Terminal verdict for every agent that is still running, given the
    /// current world. Agents already finished keep their earlier outcome.
    pub fn adjudicate(&self) -> Vec<Option<Outcome>> {
        let timed_out = self.ticks >= self.config.episode_max_steps;
        let alive_in = |team: Team| self.world.aircraft.iter().any(|a| a.alive && a.team == team);
        let dogfight = matches!(self.config.mode, Mode::Dogfight { .. });
        let both_wiped = dogfight && !alive_in(Team(0)) && !alive_in(Team(1));
        self.agents
            .iter()
            .map(|agent| {
                if agent.outcome.is_some() {
                    return agent.outcome;
                }
                let me = &self.world.aircraft[agent.slot];
                if both_wiped {
                    return Some(Outcome::Draw);
                }
                if !me.alive {
                    return Some(if me.health <= 0.0 {
                        Outcome::Destroyed
                    } else {
                        Outcome::Crashed
                    });
                }
                let success = match &self.config.mode {
                    Mode::Navigation => {
                        (me.body.position - self.config.goal()).norm() <= self.config.reward.goal_radius
                    }
                    Mode::Dogfight { .. } => !alive_in(Team(1 - agent.team.0)),
                    Mode::MissileEvasion { .. } => self.world.missiles.is_empty(),
                };
                if success {
                    return Some(match self.config.mode {
                        Mode::Navigation => Outcome::GoalReached,
                        Mode::Dogfight { .. } => Outcome::Won,
                        Mode::MissileEvasion { .. } => Outcome::Evaded,
                    });
                }
                timed_out.then_some(Outcome::Timeout)
            })
            .collect()
    }

    /// Every machine's state, for inspection.
    pub fn snapshot(&self) -> crate::world::WorldSnapshot {
        self.world.snapshot()
    }
}
