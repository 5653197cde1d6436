//! Many independent seeded runs. Each run owns its own world, so a batch is
//! embarrassingly parallel; results come back in seed order either way.

use crate::scenario::ScenarioConfig;
use crate::simnet::{run, SimError};
use crate::ids::Tick;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSummary {
    pub seed: u64,
    pub passed: bool,
    pub failed_audits: Vec<&'static str>,
    pub final_tick: Tick,
    pub log_records: usize,
    /// Terminal transfer states, in transfer-id order.
    pub transfer_states: Vec<String>,
}

fn one(make: &(impl Fn(u64) -> ScenarioConfig + Sync), seed: u64) -> Result<SeedSummary, SimError> {
    let r = run(&make(seed), seed)?;
    Ok(SeedSummary {
        seed,
        passed: r.report.passed(),
        failed_audits: r.report.audits.iter().filter(|a| !a.passed()).map(|a| a.name).collect(),
        final_tick: r.report.final_tick,
        log_records: r.report.log_records,
        transfer_states: r.report.transfers.values().map(|t| t.state.clone()).collect(),
    })
}

/// Runs `make(seed)` for every seed on the calling thread.
pub fn run_seeds_sequential(make: impl Fn(u64) -> ScenarioConfig + Sync, seeds: &[u64]) -> Result<Vec<SeedSummary>, SimError> {
    seeds.iter().map(|s| one(&make, *s)).collect()
}

/// Runs `make(seed)` for every seed on the rayon pool.
#[cfg(feature = "parallel")]
pub fn run_seeds_parallel(make: impl Fn(u64) -> ScenarioConfig + Sync, seeds: &[u64]) -> Result<Vec<SeedSummary>, SimError> {
    use rayon::prelude::*;
    seeds.par_iter().map(|s| one(&make, *s)).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn run_seeds(make: impl Fn(u64) -> ScenarioConfig + Sync, seeds: &[u64]) -> Result<Vec<SeedSummary>, SimError> {
    #[cfg(feature = "parallel")]
    return run_seeds_parallel(make, seeds);
    #[cfg(not(feature = "parallel"))]
    return run_seeds_sequential(make, seeds);
}
