use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use vrpslam::active::{simulate_echo, DistanceEstimator};
use vrpslam::slam::loopy_data_association;
use vrpslam_bench::{hybrid_filter, reproduction_config};

fn distance_estimator(c: &mut Criterion) {
    let cfg = reproduction_config().signal;
    let est = DistanceEstimator::new(&cfg).with_max_range(180.0);
    let echo = simulate_echo(&cfg, 20.0, 1.0, 1).unwrap();
    c.bench_function("estimate_distance_200_subcarriers", |b| b.iter(|| est.estimate(black_box(&echo), 1.0)));
}

fn data_association(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (k, m) = (8, 8);
    let weights: Vec<Vec<f64>> = (0..k).map(|_| (0..=m).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
    let new: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
    c.bench_function("loopy_association_8x8", |b| {
        b.iter(|| loopy_data_association(black_box(&weights), black_box(&new), 20, 1e-6))
    });
}

fn slam_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("slam_step");
    group.sample_size(10);
    for n in [1000, 5000] {
        let (state, params, frames) = hybrid_filter(n, 1, 3);
        group.bench_function(format!("{n}_particles"), |b| {
            b.iter_batched(
                || state.clone(),
                |mut s| s.step(&frames[0], &params, 1.0).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, distance_estimator, data_association, slam_step);
criterion_main!(benches);
