use std::hint::black_box;

use beadjam_bench::bent_state;
use beadjam_core::statics::{energy_gradient, solve_flexible};
use beadjam_core::{
    default_spec, solve_equilibrium, tendon_generalized_forces, ChainState, GravityOrientation, LoadCase,
    StiffnessCommand, TendonState,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn statics(c: &mut Criterion) {
    let spec = default_spec();
    let state = bent_state(&spec);
    let zero = ChainState::zeros(spec.joint_count());
    let load = LoadCase::oriented(&spec, GravityOrientation::Horizontal, 100.0).unwrap();
    let mut pull = TendonState::slack(&spec);
    pull.tensions[0] = 8.0;
    pull.tensions[4] = 4.0;
    let jammed = StiffnessCommand::jammed(&spec, 30.0);

    c.bench_function("tendon_generalized_forces", |b| {
        b.iter(|| tendon_generalized_forces(&spec, &spec.segments[1].tendons[0], black_box(&state), 10.0).unwrap())
    });
    c.bench_function("energy_gradient", |b| {
        b.iter(|| energy_gradient(&spec, black_box(&state), &pull, &load).unwrap())
    });

    let mut group = c.benchmark_group("equilibrium");
    group.sample_size(10);
    group.bench_function("flexible", |b| b.iter(|| solve_flexible(&spec, &pull, &load, black_box(&zero)).unwrap()));
    group.bench_function("jammed", |b| {
        b.iter(|| solve_equilibrium(&spec, &pull, &load, &jammed, black_box(&zero)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, statics);
criterion_main!(benches);
