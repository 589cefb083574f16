//! One simulated airspace: aircraft, missiles, the environment RNG and the
//! fixed per-tick update order.
//!
//! A tick runs, in order: lock maintenance, gun and missile triggers,
//! aircraft flight, missile flight with impact checks, then crash and kill
//! bookkeeping. Machines are always visited in ascending id order so float
//! results never depend on anything but the inputs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::machines::weapons::{self, closest_approach, PROXIMITY_RADIUS};
use crate::machines::{
    apply_damage, fire_missile, gun_damage, missile_guidance_step, try_lock, Aircraft, Catalog, FireRefusal,
    LockResult, MachineId, Missile, Team,
};
use crate::physics::{
    angular_damping_rate, compute_forces, compute_moments, integrate, stall_factor, AtmosphereModel, BodyState,
    ControlInput, Euler, KineticsError, KineticsMatrix,
};
use crate::rng::CountingRng;
use crate::Vec3;

/// Advances one airframe by a tick of its own flight model.
pub fn fly(
    body: &BodyState,
    controls: &ControlInput,
    params: &crate::physics::AeroParams,
    atmo: &AtmosphereModel,
    dt: f64,
) -> BodyState {
    let controls = controls.clamped();
    let forces = compute_forces(body, &controls, params, atmo);
    let q_z = stall_factor(body, atmo.density(body.altitude()), params.reference_dynamic_pressure);
    let moment = compute_moments(&controls, params, q_z);
    let damping = angular_damping_rate(params.angular_frictions, body.speed());
    integrate(body, &forces, &moment, damping, dt)
}

/// Something that happened during a tick, in the order it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Lock {
        shooter: MachineId,
        target: MachineId,
    },
    LockLost {
        shooter: MachineId,
        target: MachineId,
    },
    Launch {
        shooter: Option<MachineId>,
        missile: MachineId,
        target: MachineId,
        kind: String,
    },
    LaunchRefused {
        shooter: MachineId,
        reason: FireRefusal,
    },
    GunHit {
        shooter: MachineId,
        target: MachineId,
        damage: f64,
    },
    MissileHit {
        missile: MachineId,
        target: MachineId,
        damage: f64,
    },
    MissileExpired {
        missile: MachineId,
    },
    TargetLost {
        missile: MachineId,
    },
    Destroyed {
        aircraft: MachineId,
    },
    Crashed {
        aircraft: MachineId,
    },
}

/// Trigger state for one aircraft for one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triggers {
    pub gun: bool,
    pub missile: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("unknown machine {0}")]
    UnknownMachine(MachineId),
    #[error("custom physics mode is not enabled for machine {0}")]
    NotCustom(MachineId),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error("unknown aircraft type `{0}`")]
    UnknownAircraft(String),
    #[error("unknown missile type `{0}`")]
    UnknownMissile(String),
    #[error(transparent)]
    Refused(#[from] FireRefusal),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AircraftView {
    pub id: MachineId,
    pub team: Team,
    pub kind: String,
    pub body: BodyState,
    pub health: f64,
    pub alive: bool,
    pub missiles_left: u32,
    pub locked_target: Option<MachineId>,
    pub custom_physics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissileView {
    pub id: MachineId,
    pub kind: String,
    pub body: BodyState,
    pub target: MachineId,
    pub shooter: Option<MachineId>,
    pub endurance_remaining: f64,
    pub custom_physics: bool,
}

/// Serializable picture of a world at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub tick: u64,
    pub clock: f64,
    pub aircraft: Vec<AircraftView>,
    pub missiles: Vec<MissileView>,
}

#[derive(Debug, Clone)]
pub struct World {
    pub catalog: Arc<Catalog>,
    pub atmosphere: AtmosphereModel,
    pub aircraft: Vec<Aircraft>,
    /// Missiles still in flight.
    pub missiles: Vec<Missile>,
    pub rng: CountingRng,
    tick: u64,
    clock: f64,
    next_id: u32,
}

impl World {
    pub fn new(catalog: Arc<Catalog>, seed: u64) -> Self {
        Self {
            catalog,
            atmosphere: AtmosphereModel::default(),
            aircraft: Vec::new(),
            missiles: Vec::new(),
            rng: CountingRng::seed_from(seed),
            tick: 0,
            clock: 0.0,
            next_id: 0,
        }
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    /// Simulated seconds since creation.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    fn allocate_id(&mut self) -> MachineId {
        let id = MachineId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn spawn_aircraft(&mut self, kind: &str, team: Team, body: BodyState) -> Result<MachineId, WorldError> {
        let spec = self
            .catalog
            .aircraft(kind)
            .ok_or_else(|| WorldError::UnknownAircraft(kind.into()))?
            .clone();
        let id = self.allocate_id();
        self.aircraft.push(Aircraft::new(id, team, spec, body));
        Ok(id)
    }

    /// Launches a missile from a fixed site (no shooter aircraft, no lock),
    /// used for surface-to-air threats. The inbound limit still applies.
    pub fn launch_from_site(
        &mut self,
        kind: &str,
        body: BodyState,
        target: MachineId,
    ) -> Result<MachineId, WorldError> {
        let spec = self
            .catalog
            .missile(kind)
            .ok_or_else(|| WorldError::UnknownMissile(kind.into()))?
            .clone();
        self.aircraft_index(target).ok_or(WorldError::UnknownMachine(target))?;
        if self.inbound(target) >= weapons::MAX_INBOUND_MISSILES {
            return Err(FireRefusal::InboundLimit.into());
        }
        let id = self.allocate_id();
        self.missiles
            .push(Missile::new(id, spec, kind.into(), body, target, None));
        Ok(id)
    }

    pub fn aircraft_index(&self, id: MachineId) -> Option<usize> {
        self.aircraft.iter().position(|a| a.id == id)
    }

    pub fn aircraft(&self, id: MachineId) -> Option<&Aircraft> {
        self.aircraft.iter().find(|a| a.id == id)
    }

    pub fn aircraft_mut(&mut self, id: MachineId) -> Option<&mut Aircraft> {
        self.aircraft.iter_mut().find(|a| a.id == id)
    }

    /// Active missiles currently chasing `target`.
    pub fn inbound(&self, target: MachineId) -> usize {
        self.missiles.iter().filter(|m| m.active && m.target == target).count()
    }

    /// Missiles in flight that `shooter` launched.
    pub fn in_flight_from(&self, shooter: MachineId) -> u32 {
        self.missiles.iter().filter(|m| m.shooter == Some(shooter)).count() as u32
    }

    fn custom_slot(&mut self, id: MachineId) -> Option<&mut crate::machines::CustomPhysics> {
        if let Some(a) = self.aircraft.iter_mut().find(|a| a.id == id) {
            return Some(&mut a.custom);
        }
        self.missiles.iter_mut().find(|m| m.id == id).map(|m| &mut m.custom)
    }

    /// Hands a machine's kinetics to an external driver, or takes it back.
    /// While enabled the machine is frozen between updates.
    pub fn set_custom_physics_mode(&mut self, id: MachineId, enabled: bool) -> Result<(), WorldError> {
        let slot = self.custom_slot(id).ok_or(WorldError::UnknownMachine(id))?;
        slot.enabled = enabled;
        if !enabled {
            slot.pending = None;
        }
        Ok(())
    }

    /// Queues an externally computed pose; it is applied on the next tick.
    pub fn update_machine_kinetics(&mut self, id: MachineId, matrix: KineticsMatrix) -> Result<(), WorldError> {
        let slot = self.custom_slot(id).ok_or(WorldError::UnknownMachine(id))?;
        if !slot.enabled {
            return Err(WorldError::NotCustom(id));
        }
        matrix.decode()?;
        slot.pending = Some(matrix);
        Ok(())
    }

    /// Runs one tick. `triggers` is indexed like `self.aircraft`; missing
    /// entries mean no trigger.
    pub fn tick(&mut self, triggers: &[Triggers], dt: f64) -> Vec<WorldEvent> {
        let mut events = Vec::new();
        self.update_locks(&mut events);
        self.pull_triggers(triggers, dt, &mut events);

        let previous: Vec<Vec3> = self.aircraft.iter().map(|a| a.body.position).collect();
        for aircraft in self.aircraft.iter_mut().filter(|a| a.alive) {
            if aircraft.custom.enabled {
                if let Some(matrix) = aircraft.custom.pending.take() {
                    apply_pose(&mut aircraft.body, &matrix);
                }
            } else {
                aircraft.body = fly(
                    &aircraft.body,
                    &aircraft.controls,
                    &aircraft.params,
                    &self.atmosphere,
                    dt,
                );
            }
        }

        self.fly_missiles(&previous, dt, &mut events);

        for aircraft in self.aircraft.iter_mut().filter(|a| a.alive) {
            if aircraft.health <= 0.0 {
                aircraft.alive = false;
                events.push(WorldEvent::Destroyed { aircraft: aircraft.id });
            } else if aircraft.body.altitude() <= 0.0 {
                aircraft.alive = false;
                events.push(WorldEvent::Crashed { aircraft: aircraft.id });
            }
        }

        self.tick += 1;
        self.clock = self.tick as f64 * dt;
        events
    }

    fn update_locks(&mut self, events: &mut Vec<WorldEvent>) {
        for i in 0..self.aircraft.len() {
            let shooter = &self.aircraft[i];
            let previous = shooter.locked_target;
            let keep = previous
                .and_then(|t| self.aircraft(t))
                .is_some_and(|t| try_lock(shooter, t) == LockResult::Locked);
            let next = if keep {
                previous
            } else {
                self.aircraft
                    .iter()
                    .filter(|c| try_lock(shooter, c) == LockResult::Locked)
                    .map(|c| ((c.body.position - shooter.body.position).norm(), c.id))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .map(|(_, id)| id)
            };
            let id = shooter.id;
            if next != previous {
                if let Some(target) = previous {
                    events.push(WorldEvent::LockLost { shooter: id, target });
                }
                if let Some(target) = next {
                    events.push(WorldEvent::Lock { shooter: id, target });
                }
            }
            self.aircraft[i].locked_target = next;
        }
    }

    fn pull_triggers(&mut self, triggers: &[Triggers], dt: f64, events: &mut Vec<WorldEvent>) {
        for i in 0..self.aircraft.len() {
            let t = triggers.get(i).copied().unwrap_or_default();
            if t.gun {
                for j in 0..self.aircraft.len() {
                    if let Some(damage) = gun_damage(&self.aircraft[i], &self.aircraft[j], dt) {
                        let shooter = self.aircraft[i].id;
                        let target = &mut self.aircraft[j];
                        target.health = (target.health - damage).max(0.0);
                        events.push(WorldEvent::GunHit {
                            shooter,
                            target: target.id,
                            damage,
                        });
                    }
                }
            }
            if t.missile {
                let inbound = self.aircraft[i].locked_target.map_or(0, |t| self.inbound(t));
                let id = MachineId(self.next_id);
                let catalog = Arc::clone(&self.catalog);
                match fire_missile(&mut self.aircraft[i], inbound, id, &catalog) {
                    Ok(missile) => {
                        self.next_id += 1;
                        events.push(WorldEvent::Launch {
                            shooter: missile.shooter,
                            missile: missile.id,
                            target: missile.target,
                            kind: missile.loadout_name.clone(),
                        });
                        self.missiles.push(missile);
                    }
                    Err(reason) => events.push(WorldEvent::LaunchRefused {
                        shooter: self.aircraft[i].id,
                        reason,
                    }),
                }
            }
        }
    }

    fn fly_missiles(&mut self, previous: &[Vec3], dt: f64, events: &mut Vec<WorldEvent>) {
        let mut missiles = std::mem::take(&mut self.missiles);
        for missile in missiles.iter_mut() {
            let Some(ti) = self.aircraft_index(missile.target) else {
                missile.active = false;
                events.push(WorldEvent::TargetLost { missile: missile.id });
                continue;
            };
            if !self.aircraft[ti].alive {
                missile.active = false;
                events.push(WorldEvent::TargetLost { missile: missile.id });
                continue;
            }
            let start = missile.body.position;
            if missile.custom.enabled {
                if let Some(matrix) = missile.custom.pending.take() {
                    apply_pose(&mut missile.body, &matrix);
                }
                missile.endurance_remaining -= dt;
                missile.flight_time += dt;
                if missile.endurance_remaining <= weapons::ENDURANCE_EPSILON {
                    missile.active = false;
                }
            } else {
                *missile = missile_guidance_step(missile, &self.aircraft[ti].body, dt);
            }
            let target = &mut self.aircraft[ti];
            let miss = closest_approach(&start, &missile.body.position, &previous[ti], &target.body.position);
            if miss < PROXIMITY_RADIUS {
                missile.active = false;
                let damage = apply_damage(target, &missile.spec, &mut self.rng);
                // Kills are booked with the crash checks at the end of the tick.
                target.alive = true;
                events.push(WorldEvent::MissileHit {
                    missile: missile.id,
                    target: target.id,
                    damage,
                });
            } else if !missile.active {
                events.push(WorldEvent::MissileExpired { missile: missile.id });
            }
        }
        for missile in missiles.iter().filter(|m| !m.active) {
            if let Some(shooter) = missile.shooter.and_then(|s| self.aircraft_mut(s)) {
                shooter.missiles_expended += 1;
            }
        }
        missiles.retain(|m| m.active);
        self.missiles = missiles;
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            tick: self.tick,
            clock: self.clock,
            aircraft: self
                .aircraft
                .iter()
                .map(|a| AircraftView {
                    id: a.id,
                    team: a.team,
                    kind: a.spec.name.clone(),
                    body: a.body,
                    health: a.health,
                    alive: a.alive,
                    missiles_left: a.missiles_left(),
                    locked_target: a.locked_target,
                    custom_physics: a.custom.enabled,
                })
                .collect(),
            missiles: self
                .missiles
                .iter()
                .map(|m| MissileView {
                    id: m.id,
                    kind: m.loadout_name.clone(),
                    body: m.body,
                    target: m.target,
                    shooter: m.shooter,
                    endurance_remaining: m.endurance_remaining,
                    custom_physics: m.custom.enabled,
                })
                .collect(),
        }
    }
}

/// Applies an externally supplied pose. Yaw and velocities are kept.
fn apply_pose(body: &mut BodyState, matrix: &KineticsMatrix) {
    // Validated when queued.
    let (position, roll, pitch) = matrix.decode().expect("pose validated on update");
    body.position = position;
    body.orientation = Euler::new(roll, pitch, body.orientation.yaw).normalized();
}
