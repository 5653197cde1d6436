use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use interchain_core::batch::{run_seeds_parallel, run_seeds_sequential};
use interchain_core::scenario::random_fault_scenario;

fn seed_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("seed_sweep");
    g.sample_size(10);
    for n in [16u64, 64] {
        let seeds: Vec<u64> = (0..n).collect();
        g.bench_with_input(BenchmarkId::new("sequential", n), &seeds, |b, s| {
            b.iter(|| run_seeds_sequential(random_fault_scenario, s).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("parallel", n), &seeds, |b, s| {
            b.iter(|| run_seeds_parallel(random_fault_scenario, s).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, seed_sweep);
criterion_main!(benches);
