use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lavrentiev::experiments::{apriori_alpha, build_example, run_table, standard_deltas};
use lavrentiev::operators::{decay_apply, decay_deriv_adjoint_apply};
use lavrentiev::solver::vi_solve;
use lavrentiev::{ExampleKind, Grid};

fn operator(c: &mut Criterion) {
    let mut group = c.benchmark_group("decay_operator");
    for n in [200, 800, 3200] {
        let spec = build_example(ExampleKind::Example2, Grid::new(n).unwrap()).unwrap();
        group.bench_with_input(BenchmarkId::new("apply", n), &spec, |b, s| {
            b.iter(|| decay_apply(black_box(&s.u_star), s.c0))
        });
        group.bench_with_input(BenchmarkId::new("adjoint", n), &spec, |b, s| {
            b.iter(|| decay_deriv_adjoint_apply(black_box(&s.u_star), &s.source, s.c0).unwrap())
        });
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let spec = build_example(ExampleKind::Example1, Grid::new(200).unwrap()).unwrap();
    let mut group = c.benchmark_group("vi_solve");
    for alpha in [1e-1, 1e-2, 1e-3] {
        let cfg = spec.solver_config(alpha).unwrap();
        group.bench_with_input(BenchmarkId::new("noise_free", alpha), &cfg, |b, cfg| {
            b.iter(|| vi_solve(&spec.operator(), &spec.set(), black_box(&spec.f_star), cfg).unwrap())
        });
    }
    let delta = 1e-3;
    let cfg = spec
        .solver_config(apriori_alpha(delta).unwrap())
        .unwrap()
        .with_delta(delta);
    group.bench_function("discrepancy_stop", |b| {
        b.iter(|| vi_solve(&spec.operator(), &spec.set(), black_box(&spec.f_star), &cfg).unwrap())
    });
    group.finish();
}

fn table(c: &mut Criterion) {
    let spec = build_example(ExampleKind::Example2, Grid::new(200).unwrap()).unwrap();
    let deltas = standard_deltas();
    c.bench_function("run_table/example2", |b| {
        b.iter(|| run_table(&spec, black_box(&deltas), 0).unwrap())
    });
}

criterion_group!(benches, operator, solve, table);
criterion_main!(benches);
