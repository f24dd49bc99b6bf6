use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fofr_bench::{covariance, dataset, eigensystem};
use fofr_core::inference::bootstrap_ensemble;
use fofr_core::{fit, solve_eigensystem, LambdaSelection};
use std::hint::black_box;

fn eigensolve(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigensolve");
    for g in [50, 100] {
        let (design, data) = dataset(60, g, 1).unwrap();
        let cov = covariance(&data).unwrap();
        let v = design.spec.truncation();
        group.bench_with_input(BenchmarkId::from_parameter(g), &g, |b, _| {
            b.iter(|| solve_eigensystem(black_box(&cov), v, &design.grid).unwrap())
        });
    }
    group.finish();
}

fn gcv_fit(c: &mut Criterion) {
    let (design, data) = dataset(60, 100, 2).unwrap();
    let es = eigensystem(&design, &data).unwrap();
    c.bench_function("fit_gcv_n60_g100", |b| {
        b.iter(|| fit(&data.x, &data.y, es.clone(), &LambdaSelection::Gcv, None).unwrap())
    });
}

fn bootstrap(c: &mut Criterion) {
    let (design, data) = dataset(60, 100, 3).unwrap();
    let fitted = design.fit(&data).unwrap();
    let mut group = c.benchmark_group("bootstrap");
    group.sample_size(10);
    group.bench_function("q50_gcv", |b| {
        b.iter(|| bootstrap_ensemble(&fitted, 50, 7, &LambdaSelection::Gcv).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eigensolve, gcv_fit, bootstrap);
criterion_main!(benches);
