//! Discrete-event scenario runner.
//!
//! Every vehicle beacons at rate γ with a random phase; frames reach every
//! other vehicle in the area after their airtime. Each vehicle runs its own
//! verification engine, and the node at the center (node 0) is the one the
//! metrics describe by default.

pub mod channel;
mod config;
mod kernel;

pub use config::{ConfigError, DetectionConfig, MetricsScope, ScenarioConfig};
pub use kernel::{Event, EventKind, Frame, Simulation};

use rayon::prelude::*;

use crate::metrics::{mean_summary, RunMetrics, RunSummary};
use crate::time::SimTime;

/// Runs one scenario with the configured seed.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunMetrics, ConfigError> {
    Ok(Simulation::new(config, 0)?.run())
}

/// Results of `n_runs` replications with seeds `seed, seed+1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Replications {
    pub config: ScenarioConfig,
    pub runs: Vec<RunMetrics>,
}

impl Replications {
    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(RunMetrics::summary).collect()
    }

    /// Column means over runs, in [`RunSummary::COLUMNS`] order.
    pub fn mean_summary(&self) -> [f64; 20] {
        mean_summary(&self.summaries())
    }

    /// Accepted-message waiting times pooled over all runs, sorted.
    pub fn pooled_waiting(&self) -> Vec<SimTime> {
        let mut all: Vec<SimTime> = self
            .runs
            .iter()
            .flat_map(|r| r.accepted_waiting())
            .collect();
        all.sort_unstable();
        all
    }

    pub fn mean_cooperative_ratio(&self) -> f64 {
        let s = self.summaries();
        s.iter().map(|x| x.cooperative_ratio).sum::<f64>() / s.len() as f64
    }

    pub fn violations(&self) -> impl Iterator<Item = &String> {
        self.runs.iter().flat_map(|r| r.violations.iter())
    }
}

/// Runs replications in parallel; results are ordered by run index.
pub fn run_replications(
    config: &ScenarioConfig,
    n_runs: usize,
) -> Result<Replications, ConfigError> {
    assert!(n_runs >= 1, "at least one run");
    config.validate()?;
    let runs = (0..n_runs)
        .into_par_iter()
        .map(|i| Simulation::new(config, i).map(Simulation::run))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Replications {
        config: config.clone(),
        runs,
    })
}
