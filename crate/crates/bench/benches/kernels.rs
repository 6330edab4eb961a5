use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qst_bench::instance;
use qst_core::prox::eig_threshold;
use qst_core::solvers::{solve_admm_robust, solve_admm_simple, solve_least_squares, SolverConfig};
use qst_core::states::NoiseModel;

fn eig(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_threshold");
    for q in [3, 4, 5, 6] {
        let inst = instance(q, 2, 0.5, &NoiseModel::gaussian(1e-3), 1).unwrap();
        let m = inst.ensemble.pseudoinverse_apply(&inst.data.record.y).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(1 << q), &m, |b, m| {
            b.iter(|| eig_threshold(black_box(m), 0.01).unwrap())
        });
    }
    group.finish();
}

fn sampling_operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("pauli");
    for q in [4, 6, 8] {
        let inst = instance(q, 1, 0.25, &NoiseModel::noiseless(), 2).unwrap();
        let ens = &inst.ensemble;
        let rho = inst.truth.matrix();
        let y = &inst.data.record.y;
        group.bench_with_input(BenchmarkId::new("forward", q), &q, |b, _| {
            b.iter(|| ens.forward(black_box(rho)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("adjoint", q), &q, |b, _| {
            b.iter(|| ens.adjoint(black_box(y)).unwrap())
        });
    }
    group.finish();
}

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_q5");
    group.sample_size(10);
    let cfg = SolverConfig::default();
    let clean = instance(5, 2, 0.5, &NoiseModel::gaussian(1e-3), 3).unwrap();
    let dirty = instance(5, 2, 0.5, &NoiseModel::gaussian(1e-3).with_outliers(0.01, 0.1), 4).unwrap();
    group.bench_function("ls", |b| {
        b.iter(|| solve_least_squares(&clean.ensemble, &clean.data.record, &cfg).unwrap())
    });
    group.bench_function("admm_simple", |b| {
        b.iter(|| solve_admm_simple(&clean.ensemble, &clean.data.record, &cfg).unwrap())
    });
    group.bench_function("admm_robust", |b| {
        b.iter(|| solve_admm_robust(&dirty.ensemble, &dirty.data.record, &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eig, sampling_operator, solvers);
criterion_main!(benches);
