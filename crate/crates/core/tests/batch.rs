use interchain_core::batch::{run_seeds, run_seeds_sequential};
use interchain_core::scenario::random_fault_scenario;

/// Batch order and content never depend on how the seeds were scheduled.
#[test]
fn batch_matches_sequential_seed_by_seed() {
    let seeds: Vec<u64> = (100..132).collect();
    let a = run_seeds(random_fault_scenario, &seeds).unwrap();
    let b = run_seeds_sequential(random_fault_scenario, &seeds).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().map(|s| s.seed).collect::<Vec<_>>(), seeds);
    assert!(a.iter().all(|s| s.passed), "{:?}", a.iter().filter(|s| !s.passed).collect::<Vec<_>>());
}
