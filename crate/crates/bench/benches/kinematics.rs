use std::hint::black_box;

use beadjam_bench::{bent_arcs, bent_state, proximal_points};
use beadjam_core::{arc_transform, arcs_to_state, chain_forward_kinematics, chain_to_arcs, default_spec, fit_arc};
use criterion::{criterion_group, criterion_main, Criterion};

fn kinematics(c: &mut Criterion) {
    let spec = default_spec();
    let arcs = bent_arcs(&spec);
    let state = bent_state(&spec);
    let points = proximal_points(&spec, &state);

    c.bench_function("arc_transform", |b| b.iter(|| arc_transform(black_box(&arcs[0]))));
    c.bench_function("chain_forward_kinematics", |b| {
        b.iter(|| chain_forward_kinematics(&spec, black_box(&state)).unwrap())
    });
    c.bench_function("arcs_to_state", |b| b.iter(|| arcs_to_state(&spec, black_box(&arcs)).unwrap()));
    c.bench_function("fit_arc", |b| b.iter(|| fit_arc(black_box(&points)).unwrap()));
    c.bench_function("chain_to_arcs", |b| b.iter(|| chain_to_arcs(&spec, black_box(&state)).unwrap()));
}

criterion_group!(benches, kinematics);
criterion_main!(benches);
