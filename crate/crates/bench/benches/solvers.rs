use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oqho_bench::{dense, full_measure, mild_kernel, pi};
use oqho_core::linalg::{expm, logm, identity, C64};
use oqho_core::measure::bracket;
use oqho_core::solvers::{
    forward_csk_evolution, forward_qef_measure, inverse_toe_measure, spde_fast_path_with_kernel, DEFAULT_LAMBDA_NODES,
};
use oqho_core::MeasurePath;

fn forward_paths(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_csk");
    g.sample_size(10);
    for steps in [32usize, 64, 128] {
        let ccr = mild_kernel(steps);
        let f = MeasurePath::atomic(*ccr.grid(), &pi()).unwrap();
        g.bench_with_input(BenchmarkId::new("general", steps), &steps, |b, _| {
            b.iter(|| forward_csk_evolution(black_box(&f), &ccr).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("spde", steps), &steps, |b, _| {
            b.iter(|| spde_fast_path_with_kernel(&ccr, black_box(&pi())).unwrap())
        });
    }
    g.finish();
}

fn bridge(c: &mut Criterion) {
    let mut g = c.benchmark_group("bridge");
    g.sample_size(10);
    let ccr = mild_kernel(32);
    let f = MeasurePath::atomic(*ccr.grid(), &pi()).unwrap();
    g.bench_function("forward_qef_32", |b| b.iter(|| forward_qef_measure(black_box(&f), &ccr).unwrap()));
    let n = MeasurePath::diagonal_lebesgue(*ccr.grid(), &pi()).unwrap();
    g.bench_function("inverse_toe_32", |b| {
        b.iter(|| inverse_toe_measure(black_box(&n), &ccr, DEFAULT_LAMBDA_NODES).unwrap())
    });
    g.finish();
}

fn matrix_functions(c: &mut Criterion) {
    let mut g = c.benchmark_group("matrix_functions");
    for n in [8usize, 64] {
        let a = dense(n, 2.0 / n as f64);
        g.bench_with_input(BenchmarkId::new("expm", n), &a, |b, a| b.iter(|| expm(black_box(a)).unwrap()));
        // near the identity so the principal logarithm is well conditioned
        let near = identity::<C64>(n) + &a * C64::new(0.2, 0.0);
        g.bench_with_input(BenchmarkId::new("logm", n), &near, |b, m| b.iter(|| logm(black_box(m)).unwrap()));
    }
    g.finish();
}

fn measure_bracket(c: &mut Criterion) {
    let ccr = mild_kernel(16);
    let q1 = full_measure(&ccr, 0.1);
    let q2 = full_measure(&ccr, 0.05).scale(C64::new(0.0, 1.0));
    c.bench_function("bracket_16", |b| b.iter(|| bracket(black_box(&q1), black_box(&q2), &ccr).unwrap()));
}

criterion_group!(benches, forward_paths, bridge, matrix_functions, measure_bracket);
criterion_main!(benches);
