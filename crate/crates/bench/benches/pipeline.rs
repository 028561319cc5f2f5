use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cubicavoid::{f_reduced, fundamental_scan, integrate_cubic, LieAlgebraElement};
use cubicavoid_bench::so3_bump;

fn bench_integrate(c: &mut Criterion) {
    let (model, spec, init) = so3_bump();
    let mut group = c.benchmark_group("integrate_cubic");
    for nodes in [100, 400] {
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |b, &n| {
            b.iter(|| integrate_cubic(&model, &spec, black_box(&init), 0.0, 3.0, n).unwrap())
        });
    }
    group.finish();
}

fn bench_f_reduced(c: &mut Criterion) {
    let (model, _, _) = so3_bump();
    let e = |c: [f64; 3]| LieAlgebraElement::from_slice(&c);
    let x = [e([0.3, -0.2, 0.5]), e([0.1, 0.4, -0.3]), e([-0.6, 0.2, 0.1])];
    let w = [e([0.7, 0.1, -0.2]), e([0.0, 0.3, 0.2]), e([0.4, -0.5, 0.1])];
    c.bench_function("f_reduced", |b| {
        b.iter(|| f_reduced(&model, [&x[0], &x[1], &x[2]], [&w[0], &w[1], &w[2]]).unwrap())
    });
}

fn bench_scan(c: &mut Criterion) {
    let (model, spec, init) = so3_bump();
    let traj = integrate_cubic(&model, &spec, &init, 0.0, 3.0, 300).unwrap();
    let mut group = c.benchmark_group("fundamental_scan");
    group.sample_size(10);
    group.bench_function("so3_bump_300", |b| b.iter(|| fundamental_scan(&model, &spec, black_box(&traj)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_integrate, bench_f_reduced, bench_scan);
criterion_main!(benches);
