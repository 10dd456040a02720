use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use livsic_core::*;

fn orbit(c: &mut Criterion) {
    let lsv = lsv_map(0.5).unwrap();
    let f = Observable::log_derivative(&lsv);
    c.bench_function("birkhoff sum, LSV α=0.5, 10^5 steps", |b| {
        b.iter(|| birkhoff_sum(&lsv, &f, black_box(0.3141), 100_000).unwrap())
    });
}

fn ulam(c: &mut Criterion) {
    let lsv = lsv_map(0.5).unwrap();
    c.bench_function("ulam assembly, 4096 bins", |b| b.iter(|| ulam_matrix(&lsv, black_box(4096)).unwrap()));
    let op = ulam_matrix(&lsv, 1 << 14).unwrap();
    c.bench_function("invariant density, 2^14 bins", |b| b.iter(|| invariant_density(&op, 1e-12).unwrap()));
}

fn periodic(c: &mut Criterion) {
    let lsv = lsv_map(0.25).unwrap();
    c.bench_function("periodic points to period 10", |b| b.iter(|| periodic_points(&lsv, black_box(10)).unwrap()));
}

fn inducing(c: &mut Criterion) {
    let lsv = lsv_map(0.5).unwrap();
    c.bench_function("first-return partition, cap 10^4", |b| {
        b.iter(|| induce(&lsv, Interval::left_open(0.5, 1.0), black_box(10_000)).unwrap())
    });
}

criterion_group!(kernels, orbit, ulam, periodic, inducing);
criterion_main!(kernels);
