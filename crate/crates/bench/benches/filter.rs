use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use yagitrack::ekf::{predict, update, CovarianceUpdate, Measurement};
use yagitrack::io::validation::{run_scenario, validation_scenario};
use yagitrack::movement::process_noise_cov;
use yagitrack::observation::measurement_row;
use yagitrack::tracker::static_inversion;
use yagitrack::{MovementParams, StateVector, TrackerConfig};
use yagitrack_bench::{study_estimate, study_tower};

fn movement(c: &mut Criterion) {
    let params = MovementParams::validation_run();
    c.bench_function("process_noise_cov/6s", |b| {
        b.iter(|| process_noise_cov(black_box(&params), black_box(6.0)).unwrap())
    });
}

fn filter_step(c: &mut Criterion) {
    let params = MovementParams::validation_run();
    let config = TrackerConfig::default();
    let tower = study_tower();
    let estimate = study_estimate();
    let obs = |s: &StateVector| {
        let row = measurement_row(s, &tower, 0, &config.pattern, config.receiver.p0)?;
        Ok((row.h_row, row.h))
    };
    let m = Measurement {
        y: 3e-9,
        r_var: 1e-18,
        t: 6.0,
        tower: 0,
        beam: 0,
    };
    c.bench_function("ekf/predict_update", |b| {
        b.iter(|| {
            let prior = predict(black_box(&estimate), &params, 6.0).unwrap();
            update(&prior, &m, &obs, CovarianceUpdate::Joseph).unwrap()
        })
    });
}

fn inversion(c: &mut Criterion) {
    let config = TrackerConfig::default();
    let tower = study_tower();
    c.bench_function("static_inversion/Z=80", |b| {
        b.iter(|| static_inversion(black_box(80.0), &tower, 0, 15.0, &config).unwrap())
    });
}

fn end_to_end(c: &mut Criterion) {
    let scenario = validation_scenario(1);
    let mut group = c.benchmark_group("track");
    group.sample_size(10);
    group.bench_function("validation_run", |b| b.iter(|| run_scenario(black_box(&scenario)).unwrap()));
    group.finish();
}

criterion_group!(benches, movement, filter_step, inversion, end_to_end);
criterion_main!(benches);
