use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bearing_core::io::TrajectorySource;
use bearing_core::pairing::build_channel;
use bearing_core::pipeline::{estimate_record, standard_fixture, EstimateConfig, RuntimeConfig};
use bearing_core::profile::{compute_profile_fused, compute_profile_with};
use bearing_core::steering::{build_grid, precompute_steering, SteeringOptions};
use bearing_core::Parallelism;

fn thread_counts() -> Vec<usize> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut v = vec![1];
    if n > 1 {
        v.push(n);
    }
    v
}

fn profile_kernels(c: &mut Criterion) {
    let record = standard_fixture();
    let traj = record.trajectory(TrajectorySource::Groundtruth).unwrap();
    let cfg = RuntimeConfig::LowRes.apply(EstimateConfig::default()).unwrap();
    let channel = build_channel(&record.log, traj, cfg.grid.phase_factor, 0).unwrap();
    let grid = Arc::new(build_grid(cfg.grid).unwrap());
    let table = precompute_steering(&grid, &channel.positions(), &SteeringOptions::default()).unwrap();

    let mut group = c.benchmark_group("profile_180x90");
    group.sample_size(10);
    for threads in thread_counts() {
        let par = Parallelism::threads(threads);
        group.bench_with_input(BenchmarkId::new("table", threads), &par, |b, par| {
            b.iter(|| compute_profile_with(&channel, &table, *par).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fused", threads), &par, |b, par| {
            b.iter(|| compute_profile_fused(&channel, &grid, *par).unwrap())
        });
    }
    group.finish();
}

fn configurations(c: &mut Criterion) {
    let record = standard_fixture();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for config in RuntimeConfig::ALL {
        for threads in thread_counts() {
            let cfg = EstimateConfig {
                parallelism: Parallelism::threads(threads),
                ..config.apply(EstimateConfig::default()).unwrap()
            };
            let id = BenchmarkId::new(config.name(), threads);
            group.bench_with_input(id, &cfg, |b, cfg| {
                b.iter(|| estimate_record(&record, TrajectorySource::Groundtruth, cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, profile_kernels, configurations);
criterion_main!(benches);
