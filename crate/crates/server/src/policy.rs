//! Simple action sources for external slots, used by the CLI and tests.

use std::str::FromStr;

use dogfight_core::rng::CountingRng;
use dogfight_core::scenario::{Controller, Observation, ScenarioConfig};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Centred stick, triggers released.
    Neutral,
    /// Stick positions uniform in [-1, 1], triggers uniform in [0, 1].
    Random,
    /// Hands every external slot to the given autopilot.
    Autopilot(Controller),
}

impl PolicyKind {
    /// Rewrites the scenario so autopilot policies fly the external slots.
    pub fn prepare(self, config: &mut ScenarioConfig) {
        if let Self::Autopilot(controller) = self {
            for agent in &mut config.agents {
                if agent.controller == Controller::External {
                    agent.controller = controller;
                }
            }
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "neutral" => Ok(Self::Neutral),
            "random" => Ok(Self::Random),
            "autopilot_navigate" => Ok(Self::Autopilot(Controller::AutopilotNavigate)),
            "autopilot_combat" => Ok(Self::Autopilot(Controller::AutopilotCombat)),
            other => Err(format!(
                "unknown policy {other:?} (expected neutral, random, autopilot_navigate or autopilot_combat)"
            )),
        }
    }
}

/// Produces one action per slot. Entries for autopilot slots are empty.
#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    external: Vec<bool>,
    arity: usize,
    rng: CountingRng,
}

impl Policy {
    /// `seed` only matters for [`PolicyKind::Random`].
    pub fn new(kind: PolicyKind, config: &ScenarioConfig, seed: u64) -> Self {
        Self {
            kind,
            external: config
                .agents
                .iter()
                .map(|a| a.controller == Controller::External)
                .collect(),
            arity: config.mode.action_arity(),
            rng: CountingRng::seed_from(seed),
        }
    }

    pub fn actions(&mut self, _step: u64, _observations: &[Observation]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.external.len());
        for &external in &self.external {
            if !external {
                out.push(Vec::new());
                continue;
            }
            let action = match self.kind {
                PolicyKind::Neutral | PolicyKind::Autopilot(_) => vec![0.0; self.arity],
                PolicyKind::Random => (0..self.arity)
                    .map(|i| {
                        if i < 3 {
                            self.rng.gen_range(-1.0..=1.0)
                        } else {
                            self.rng.gen_range(0.0..=1.0)
                        }
                    })
                    .collect(),
            };
            out.push(action);
        }
        out
    }
}
