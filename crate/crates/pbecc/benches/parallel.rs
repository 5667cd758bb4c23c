//! Batch scenario runs: parallel (rayon, default feature) against the
//! always-sequential baseline.
//!
//! Compare with `cargo bench` (parallel) and
//! `cargo bench --no-default-features` (run_batch falls back to sequential).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pbecc::harness::runner::{run_batch, run_batch_sequential};
use pbecc::harness::scenario::{bundled_by_name, Scenario};

fn jobs(n: u64) -> Vec<(Scenario, u64)> {
    let mut s = bundled_by_name("controlled_competition").expect("bundled scenario");
    s.duration_ms = 2_000;
    (0..n).map(|seed| (s.clone(), seed)).collect()
}

fn bench_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_runs");
    group.sample_size(10);
    for n in [4u64, 8] {
        let js = jobs(n);
        group.bench_with_input(BenchmarkId::new("run_batch", n), &js, |b, js| {
            b.iter(|| run_batch(js))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &js, |b, js| {
            b.iter(|| run_batch_sequential(js))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch);
criterion_main!(benches);
