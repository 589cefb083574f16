//! Flies the navigation autopilot from a batch of random spawns and prints
//! each episode's outcome.
//!
//! ```text
//! cargo run --release -p dogfight-core --example navigate -- 20
//! ```

use std::sync::Arc;

use dogfight_core::fleet::run_episodes;
use dogfight_core::machines::Catalog;
use dogfight_core::runtime::RunMode;
use dogfight_core::scenario::{Controller, ScenarioConfig};

fn main() {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let configs: Vec<_> = (0..n)
        .map(|seed| ScenarioConfig::navigation(seed, Controller::AutopilotNavigate))
        .collect();
    let catalog = Arc::new(Catalog::builtin());
    let mut reached = 0;
    for summary in run_episodes(&configs, &catalog, RunMode::Synchronous) {
        let s = summary.expect("episode");
        let outcome = s.outcomes[0].expect("finished episodes have an outcome");
        reached += usize::from(outcome.is_success());
        println!(
            "seed {:3}  {:?} after {} ticks, return {:.3}",
            s.seed, outcome, s.ticks, s.returns[0]
        );
    }
    println!("{reached}/{n} reached the goal");
}
