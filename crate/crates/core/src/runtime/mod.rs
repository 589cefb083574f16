//! Stepping engine: synchronous and fixed-ratio asynchronous modes, episode
//! traces and bit-exact replay.
//!
//! In synchronous mode every agent step advances exactly one physics tick.
//! In asynchronous mode an agent step advances `ticks_per_inference` ticks
//! with the submitted action held, which is how a slow policy sees a fast
//! simulation. Nothing here looks at the wall clock.

mod trace;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trace::{to_line, AgentRecord, Trace, TraceHeader, TraceRecord, TraceWriter, TRACE_SCHEMA, TRACE_VERSION};

use crate::machines::Catalog;
use crate::scenario::{Observation, Scenario, ScenarioConfig, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunMode {
    Synchronous,
    Asynchronous { ticks_per_inference: u32 },
}

impl RunMode {
    pub fn asynchronous(ticks_per_inference: u32) -> Result<Self, RuntimeError> {
        if ticks_per_inference == 0 {
            return Err(RuntimeError::BadMode("ticks_per_inference must be at least 1".into()));
        }
        Ok(Self::Asynchronous { ticks_per_inference })
    }

    pub fn ticks_per_step(&self) -> u32 {
        match *self {
            Self::Synchronous => 1,
            Self::Asynchronous { ticks_per_inference } => ticks_per_inference,
        }
    }

    fn validate(&self) -> Result<(), RuntimeError> {
        match *self {
            Self::Asynchronous { ticks_per_inference: 0 } => {
                Err(RuntimeError::BadMode("ticks_per_inference must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid run mode: {0}")]
    BadMode(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One environment: a scenario plus its stepping mode and step counter.
#[derive(Debug, Clone)]
pub struct Env {
    scenario: Scenario,
    mode: RunMode,
    step: u64,
}

impl Env {
    pub fn new(config: ScenarioConfig, catalog: Arc<Catalog>, mode: RunMode) -> Result<Self, RuntimeError> {
        mode.validate()?;
        Ok(Self {
            scenario: Scenario::new(config, catalog)?,
            mode,
            step: 0,
        })
    }

    pub fn mode(&self) -> RunMode {
        self.mode
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn scenario_mut(&mut self) -> &mut Scenario {
        &mut self.scenario
    }

    /// Steps taken since the last reset.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Starts an episode and returns the trace header describing it.
    pub fn reset(&mut self, seed: Option<u64>) -> TraceHeader {
        let observations = self.scenario.reset(seed);
        self.step = 0;
        TraceHeader {
            schema: TRACE_SCHEMA.into(),
            version: TRACE_VERSION,
            engine: crate::ENGINE_VERSION.into(),
            scenario: self.scenario.config().clone(),
            run_mode: self.mode,
            seed: self.scenario.seed(),
            observations,
        }
    }

    /// One agent step in whichever mode the environment runs.
    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<TraceRecord, RuntimeError> {
        match self.mode {
            RunMode::Synchronous => self.step_synchronous(actions),
            RunMode::Asynchronous { .. } => self.step_asynchronous(actions),
        }
    }

    /// Exactly one tick.
    pub fn step_synchronous(&mut self, actions: &[Vec<f64>]) -> Result<TraceRecord, RuntimeError> {
        self.advance(actions, 1)
    }

    /// Holds `actions` for the configured number of ticks, stopping early
    /// only when the episode ends.
    pub fn step_asynchronous(&mut self, actions: &[Vec<f64>]) -> Result<TraceRecord, RuntimeError> {
        self.advance(actions, self.mode.ticks_per_step())
    }

    fn advance(&mut self, actions: &[Vec<f64>], ticks: u32) -> Result<TraceRecord, RuntimeError> {
        let mut results: BTreeMap<usize, AgentRecord> = BTreeMap::new();
        let mut events = Vec::new();
        let mut ran = 0;
        for _ in 0..ticks {
            let report = self.scenario.tick(actions)?;
            ran += 1;
            for r in report.results {
                let entry = results.entry(r.slot).or_insert_with(|| AgentRecord {
                    slot: r.slot,
                    action: actions[r.slot].clone(),
                    observation: r.observation,
                    reward: 0.0,
                    done: false,
                    outcome: None,
                });
                entry.observation = r.observation;
                entry.reward += r.reward;
                entry.done = r.done;
                entry.outcome = r.outcome;
            }
            events.extend(report.events);
            if self.scenario.is_finished() {
                break;
            }
        }
        let record = TraceRecord {
            step: self.step,
            ticks: ran,
            clock: self.scenario.world().clock(),
            results: results.into_values().collect(),
            events,
            rng_draws: self.scenario.world().rng.draws(),
        };
        self.step += 1;
        Ok(record)
    }

    pub fn is_finished(&self) -> bool {
        self.scenario.is_finished()
    }
}

/// Runs a full episode, asking `policy` for the actions of every step.
pub fn record_episode(
    env: &mut Env,
    seed: Option<u64>,
    mut policy: impl FnMut(u64, &[Observation]) -> Vec<Vec<f64>>,
) -> Result<Trace, RuntimeError> {
    let header = env.reset(seed);
    let mut latest = header.observations.clone();
    let mut records = Vec::new();
    while !env.is_finished() {
        let actions = policy(env.steps(), &latest);
        let record = env.step(&actions)?;
        for r in &record.results {
            latest[r.slot] = r.observation;
        }
        records.push(record);
    }
    Ok(Trace { header, records })
}

/// Where a replay first disagreed with its trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    /// `None` for the initial observations.
    pub step: Option<u64>,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps_checked: u64,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.divergence.is_none()
    }
}

/// Field of `a` whose serialized form differs from `b`, checked in a fixed
/// order. Comparing serialized text compares floats bit for bit.
fn first_difference(a: &TraceRecord, b: &TraceRecord) -> Option<String> {
    if a.ticks != b.ticks {
        return Some("ticks".into());
    }
    if a.results.len() != b.results.len() {
        return Some("result count".into());
    }
    for (x, y) in a.results.iter().zip(&b.results) {
        let slot = x.slot;
        let checks = [
            ("slot", to_line(&x.slot), to_line(&y.slot)),
            ("observation", to_line(&x.observation), to_line(&y.observation)),
            ("reward", to_line(&x.reward), to_line(&y.reward)),
            ("done", to_line(&x.done), to_line(&y.done)),
            ("outcome", to_line(&x.outcome), to_line(&y.outcome)),
        ];
        for (name, l, r) in checks {
            if l != r {
                return Some(format!("slot {slot} {name}"));
            }
        }
    }
    if to_line(&a.events) != to_line(&b.events) {
        return Some("events".into());
    }
    if a.rng_draws != b.rng_draws {
        return Some("rng_draws".into());
    }
    if to_line(&a.clock) != to_line(&b.clock) {
        return Some("clock".into());
    }
    None
}

/// Feeds a trace's actions into a fresh environment and checks every
/// observation, reward, event and RNG count against the recording.
pub fn replay(trace: &Trace, catalog: Arc<Catalog>) -> Result<ReplayReport, RuntimeError> {
    let header = &trace.header;
    let mut env = Env::new(header.scenario.clone(), catalog, header.run_mode)?;
    let fresh = env.reset(Some(header.seed));
    if to_line(&fresh.observations) != to_line(&header.observations) {
        return Ok(ReplayReport {
            steps_checked: 0,
            divergence: Some(Divergence {
                step: None,
                what: "initial observations".into(),
            }),
        });
    }
    let slots = header.scenario.agents.len();
    for (i, recorded) in trace.records.iter().enumerate() {
        let mut actions = vec![Vec::new(); slots];
        for r in &recorded.results {
            if r.slot < slots {
                actions[r.slot] = r.action.clone();
            }
        }
        let diverged = |what: String| {
            Ok(ReplayReport {
                steps_checked: i as u64,
                divergence: Some(Divergence {
                    step: Some(recorded.step),
                    what,
                }),
            })
        };
        let replayed = match env.step(&actions) {
            Ok(r) => r,
            Err(RuntimeError::Scenario(e)) => return diverged(format!("step rejected: {e}")),
            Err(e) => return Err(e),
        };
        if let Some(what) = first_difference(&replayed, recorded) {
            return diverged(what);
        }
    }
    Ok(ReplayReport {
        steps_checked: trace.records.len() as u64,
        divergence: None,
    })
}
