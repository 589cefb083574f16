//! Many environments at once.
//!
//! Each environment is stepped by exactly one thread at a time, so results
//! are identical whichever way a batch is scheduled. With the `parallel`
//! feature (on by default) batches are spread over a rayon pool; without it,
//! or through the `_sequential` variants, they run in order on the caller's
//! thread.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::machines::Catalog;
use crate::runtime::{record_episode, Env, RunMode, RuntimeError, Trace};
use crate::scenario::{Outcome, ScenarioConfig};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to every item, in parallel when the feature is enabled.
/// Output order always matches input order.
pub fn map_batch<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_batch_sequential(items, f)
    }
}

pub fn map_batch_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Summary of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub steps: u64,
    pub ticks: u64,
    /// Sum of rewards per slot.
    pub returns: Vec<f64>,
    pub outcomes: Vec<Option<Outcome>>,
}

impl EpisodeSummary {
    pub fn from_trace(trace: &Trace) -> Self {
        let slots = trace.header.scenario.agents.len();
        let mut returns = vec![0.0; slots];
        let mut outcomes = vec![None; slots];
        let mut ticks = 0;
        for record in &trace.records {
            ticks += u64::from(record.ticks);
            for r in &record.results {
                returns[r.slot] += r.reward;
                if r.outcome.is_some() {
                    outcomes[r.slot] = r.outcome;
                }
            }
        }
        Self {
            seed: trace.header.seed,
            steps: trace.records.len() as u64,
            ticks,
            returns,
            outcomes,
        }
    }
}

/// Runs one episode where external slots hold neutral controls, which
/// suits configs driven entirely by autopilots.
pub fn run_episode(config: &ScenarioConfig, catalog: &Arc<Catalog>, mode: RunMode) -> Result<Trace, RuntimeError> {
    let mut env = Env::new(config.clone(), Arc::clone(catalog), mode)?;
    let arity = config.mode.action_arity();
    let slots = config.agents.len();
    record_episode(&mut env, None, |_, _| vec![vec![0.0; arity]; slots])
}

pub fn run_episodes(
    configs: &[ScenarioConfig],
    catalog: &Arc<Catalog>,
    mode: RunMode,
) -> Vec<Result<EpisodeSummary, RuntimeError>> {
    map_batch(configs, |c| {
        run_episode(c, catalog, mode).map(|t| EpisodeSummary::from_trace(&t))
    })
}

pub fn run_episodes_sequential(
    configs: &[ScenarioConfig],
    catalog: &Arc<Catalog>,
    mode: RunMode,
) -> Vec<Result<EpisodeSummary, RuntimeError>> {
    map_batch_sequential(configs, |c| {
        run_episode(c, catalog, mode).map(|t| EpisodeSummary::from_trace(&t))
    })
}

/// A vector of environments stepped together, one action set per env.
#[derive(Debug, Clone)]
pub struct EnvBatch {
    pub envs: Vec<Env>,
}

impl EnvBatch {
    pub fn new(envs: Vec<Env>) -> Self {
        Self { envs }
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    /// Steps every environment that is still running. Finished ones yield
    /// `None` and are left untouched.
    pub fn step(
        &mut self,
        actions: &[Vec<Vec<f64>>],
    ) -> Vec<Option<Result<crate::runtime::TraceRecord, RuntimeError>>> {
        assert_eq!(actions.len(), self.envs.len(), "one action set per environment");
        let run = |(env, a): (&mut Env, &Vec<Vec<f64>>)| (!env.is_finished()).then(|| env.step(a));
        #[cfg(feature = "parallel")]
        {
            self.envs.par_iter_mut().zip(actions.par_iter()).map(run).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.envs.iter_mut().zip(actions.iter()).map(run).collect()
        }
    }

    pub fn step_sequential(
        &mut self,
        actions: &[Vec<Vec<f64>>],
    ) -> Vec<Option<Result<crate::runtime::TraceRecord, RuntimeError>>> {
        assert_eq!(actions.len(), self.envs.len(), "one action set per environment");
        self.envs
            .iter_mut()
            .zip(actions)
            .map(|(env, a)| (!env.is_finished()).then(|| env.step(a)))
            .collect()
    }
}
