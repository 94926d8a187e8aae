use criterion::{black_box, criterion_group, criterion_main, Criterion};
use nlospos_bench::{canyon, canyon_observations, ramp_series};
use nlospos_core::detector::detect;
use nlospos_core::pipeline::run;
use nlospos_core::scene::enumerate_paths;
use nlospos_core::wls::{build_system, path_weights, solve_wls};
use nlospos_core::{DetectorConfig, OrderingMode, WeightMode};

fn bench_enumerate(c: &mut Criterion) {
    let scene = canyon();
    c.bench_function("enumerate_paths/canyon", |b| b.iter(|| enumerate_paths(black_box(&scene)).unwrap()));
}

fn bench_solve(c: &mut Criterion) {
    let scene = canyon();
    let obs = canyon_observations(7);
    let gains: Vec<f64> = obs.iter().map(|p| p.gain).collect();
    let weights = path_weights(&gains, WeightMode::GainNormalized).unwrap();
    let system = build_system(&obs, &scene.tx, &weights).unwrap();
    c.bench_function("solve_wls/6_paths", |b| b.iter(|| solve_wls(black_box(&system)).unwrap()));
}

fn bench_detect(c: &mut Criterion) {
    let cfg = DetectorConfig::new(0.0, 1.0, 1e9, 1).unwrap();
    let series = ramp_series(64, 64, 0.0);
    c.bench_function("detect/64_no_change", |b| b.iter(|| detect(black_box(&series), &cfg).unwrap()));
}

fn bench_pipeline(c: &mut Criterion) {
    let scene = canyon();
    let obs = canyon_observations(7);
    let cfg = DetectorConfig::default();
    c.bench_function("pipeline/canyon", |b| {
        b.iter(|| run(black_box(&obs), &scene.tx, OrderingMode::DelayAscending, WeightMode::GainNormalized, &cfg).unwrap())
    });
}

criterion_group!(benches, bench_enumerate, bench_solve, bench_detect, bench_pipeline);
criterion_main!(benches);
