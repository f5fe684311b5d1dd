use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdq_bench::random_walk;
use mdq_core::fixtures::{f1, f2, f3};
use mdq_core::model::instantiate;
use mdq_core::rscost::{estimate_jn, simulate_log_weight};
use mdq_core::sim::PolicyKind;
use mdq_core::{skorohod_map, solve_game};

fn skorohod(c: &mut Criterion) {
    let mut group = c.benchmark_group("skorohod_map");
    for knots in [100, 10_000] {
        let omega = random_walk(knots, 3);
        group.bench_with_input(BenchmarkId::from_parameter(knots), &omega, |b, w| {
            b.iter(|| skorohod_map(black_box(w), -0.5, 0.5).unwrap())
        });
    }
    group.finish();
}

fn game(c: &mut Criterion) {
    let params = f3();
    c.bench_function("solve_game f3", |b| b.iter(|| solve_game(black_box(&params), 0.1).unwrap()));
    let g = solve_game(&f1(), 0.1).unwrap();
    c.bench_function("value f1", |b| b.iter(|| g.value(black_box(0.2)).unwrap()));
    c.bench_function("tau_star f1", |b| b.iter(|| g.tau_star(black_box(0.2)).unwrap()));
}

fn simulation(c: &mut Criterion) {
    let params = f2();
    let g = solve_game(&params, 0.1).unwrap();
    let mut group = c.benchmark_group("ao run f2 T=5");
    group.sample_size(20);
    for n in [100u64, 10_000] {
        let sys = instantiate(&params, n).unwrap();
        let policy = PolicyKind::Ao.build(&g);
        group.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, sys| {
            b.iter(|| simulate_log_weight(sys, policy.as_ref(), 5.0, black_box(11)).unwrap())
        });
    }
    group.finish();

    let sys = instantiate(&params, 1000).unwrap();
    let policy = PolicyKind::Ao.build(&g);
    let mut group = c.benchmark_group("estimate_jn");
    group.sample_size(10);
    group.bench_function("f2 n=1000 M=64", |b| {
        b.iter(|| estimate_jn(&sys, policy.as_ref(), 5.0, 64, black_box(1)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, skorohod, game, simulation);
criterion_main!(benches);
