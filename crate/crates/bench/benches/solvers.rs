use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use logschroed_bench::{config, ground_state, log_problem};
use logschroed_core::diagnostics::{diagnostic_mesh, energy_profile};
use logschroed_core::radial_ivp::integrate_problem;
use logschroed_core::shooting::{find_ground, scan_beta};
use logschroed_core::spectrum::{lowest_eigenvalues, SpectrumConfig};
use logschroed_core::variational::{functionals, RadialProfile};
use logschroed_core::RadialFunction;

fn ivp(c: &mut Criterion) {
    let problem = log_problem(0.0);
    let cfg = config();
    let mut group = c.benchmark_group("integrate");
    for beta in [2.0, 3f64.exp().sqrt(), 10.0] {
        group.bench_with_input(BenchmarkId::from_parameter(beta), &beta, |b, &beta| {
            b.iter(|| integrate_problem(&problem, black_box(beta), &cfg).unwrap())
        });
    }
    group.finish();
}

fn shooting(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("shooting");
    for alpha in [0.0, 1.0] {
        let problem = log_problem(alpha);
        group.bench_with_input(BenchmarkId::new("scan64", alpha), &alpha, |b, _| {
            b.iter(|| scan_beta(&problem, 0.5, 50.0, 64, &cfg).unwrap())
        });
        let scan = scan_beta(&problem, 0.5, 50.0, 64, &cfg).unwrap();
        let bracket = scan.brackets[0];
        group.bench_with_input(BenchmarkId::new("bisect", alpha), &alpha, |b, _| {
            b.iter(|| find_ground(&problem, black_box(bracket), 1e-12, &cfg).unwrap())
        });
    }
    group.finish();
}

fn checks(c: &mut Criterion) {
    let u = ground_state(1.0);
    let problem = log_problem(1.0);
    let mut group = c.benchmark_group("checks");
    group.sample_size(20);
    group.bench_function("spectrum", |b| {
        b.iter(|| lowest_eigenvalues(&u, &problem.potential, &SpectrumConfig::default()).unwrap())
    });
    let profile = RadialProfile::from_function(&u, 3, u.r_end(), 320).unwrap();
    group.bench_function("functionals", |b| {
        b.iter(|| functionals(black_box(&profile), &problem.potential, &problem.pair).unwrap())
    });
    let mesh = diagnostic_mesh(1e-6, u.r_end(), 4000).unwrap();
    group.bench_function("energy_profile", |b| {
        b.iter(|| energy_profile(&u, &problem.potential, &problem.pair, black_box(&mesh)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ivp, shooting, checks);
criterion_main!(benches);
