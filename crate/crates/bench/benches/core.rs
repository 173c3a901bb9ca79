use criterion::{criterion_group, criterion_main, Criterion};
use elq_bench::*;
use elq_core::aqec::NoiseToggles;
use elq_core::device::{DeviceParams, Node};
use elq_core::grape::{aqec_problem, fidelity_and_gradient, NODE_LABELS};
use elq_core::hilbert::SpaceSpec;
use elq_core::scenario::{run_scenario, GateOverrides};
use elq_core::tomo::{linspace, mle_reconstruct, wigner};
use std::hint::black_box;

fn bench_wigner(c: &mut Criterion) {
    let rho = logical_plus(10);
    let axis = linspace(-2.5, 2.5, 41);
    c.bench_function("wigner 41x41 cutoff 10", |b| b.iter(|| wigner(black_box(&rho), &axis, &axis).unwrap()));
}

fn bench_mle(c: &mut Criterion) {
    let rho = logical_plus(8);
    let data = parity_data(&rho, 9);
    let space = SpaceSpec::single(8).unwrap();
    c.bench_function("mle 81 parity points cutoff 8", |b| b.iter(|| mle_reconstruct(black_box(&data), &space).unwrap()));
}

fn bench_grape_gradient(c: &mut Criterion) {
    let params = DeviceParams::default();
    let prob = aqec_problem(&params, Node::A, 10, 50.0, &NoiseToggles::default()).unwrap();
    let pulse = smooth_pulse(&NODE_LABELS, 200);
    c.bench_function("grape gradient 200 steps", |b| b.iter(|| fidelity_and_gradient(&prob, black_box(&pulse)).unwrap()));
}

fn bench_bell_cycles(c: &mut Criterion) {
    let params = DeviceParams::default();
    let sc = bell_scenario(4);
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("bell corrected 4 cycles", |b| b.iter(|| run_scenario(black_box(&sc), &params, &GateOverrides::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_wigner, bench_mle, bench_grape_gradient, bench_bell_cycles);
criterion_main!(benches);
