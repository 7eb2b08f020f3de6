use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use pointnav_core::measure_compare::{run_comparison, ComparisonConfig};
use pointnav_core::pipeline::settle_and_fuse;
use pointnav_core::simworld::run_trial;
use pointnav_core::{CampaignConfig, NoiseProfile, PointingFeature, RobotMode, Vec3};

fn bench_fusion(c: &mut Criterion) {
    let estimates: Vec<PointingFeature> = (0..5)
        .map(|i| PointingFeature::from_degrees(Vec3::new(2500.0 + i as f64, -400.0, 900.0), 20.0 + i as f64, 35.0 - i as f64).unwrap())
        .collect();
    c.bench_function("settle_and_fuse_5", |b| b.iter(|| settle_and_fuse(black_box(&estimates)).unwrap()));
}

fn bench_trials(c: &mut Criterion) {
    let profile = NoiseProfile::calibrated();
    for mode in [RobotMode::Quadruped, RobotMode::Rover] {
        let world = CampaignConfig::calibrated(mode).world;
        let mut seed = 0u64;
        c.bench_function(&format!("run_trial_{mode}"), |b| {
            b.iter_batched(
                || {
                    seed += 1;
                    seed
                },
                |s| run_trial(&world, &profile, s).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
}

fn bench_compare(c: &mut Criterion) {
    let config = ComparisonConfig { trials: 1000, ..ComparisonConfig::default() };
    let mut group = c.benchmark_group("compare");
    group.sample_size(20);
    group.bench_function("run_comparison_1000", |b| b.iter(|| run_comparison(black_box(&config)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_fusion, bench_trials, bench_compare);
criterion_main!(benches);
