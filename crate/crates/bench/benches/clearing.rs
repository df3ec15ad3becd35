use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use quasifisher::fixtures::example2;
use quasifisher::oracle::grid_scan;
use quasifisher::{
    check_feasible, initial_feasible_price, lattice_descent, solve, solve_eg, EgOptions, Schedule,
};
use quasifisher_bench::instance;

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(20);
    group.bench_function("two_goods_exact", |b| {
        let m = example2();
        b.iter(|| solve(black_box(&m), 1e-8).unwrap())
    });
    for size in [2usize, 4, 6] {
        let m = instance(size, size, 7).as_f64();
        group.bench_with_input(BenchmarkId::new("float", size), &m, |b, m| {
            b.iter(|| solve(black_box(m), 1e-8).unwrap())
        });
    }
    group.finish();
}

fn components(c: &mut Criterion) {
    let m = instance(6, 6, 7).as_f64();
    let mut group = c.benchmark_group("components");
    group.bench_function("feasibility_check", |b| {
        let p = initial_feasible_price(&m);
        b.iter(|| check_feasible(black_box(&m), black_box(&p)).unwrap())
    });
    group.bench_function("barrier", |b| {
        b.iter(|| solve_eg(black_box(&m), &EgOptions::default()).unwrap())
    });
    group.sample_size(20);
    group.bench_function("descent", |b| {
        let p0 = initial_feasible_price(&m);
        b.iter(|| lattice_descent(black_box(&m), &p0, &Schedule::for_tol(1e-8)).unwrap())
    });
    group.finish();
}

fn region(c: &mut Criterion) {
    let m = example2().as_f64();
    let mut group = c.benchmark_group("region");
    group.sample_size(10);
    for res in [51usize, 201] {
        group.bench_with_input(BenchmarkId::new("grid_scan", res), &res, |b, &res| {
            b.iter(|| grid_scan(black_box(&m), &[(0.1, 5.0), (0.1, 5.0)], res).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, end_to_end, components, region);
criterion_main!(benches);
