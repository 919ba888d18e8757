use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fockflow_bench::{grid, kernel};
use fockflow_core::iota;

fn representation(c: &mut Criterion) {
    let mut group = c.benchmark_group("iota");
    for m in [2, 3, 4] {
        let g = grid(m, 1, 1);
        let k = kernel(&g, 1);
        group.bench_with_input(BenchmarkId::from_parameter(m), &k, |b, k| b.iter(|| iota(k)));
    }
    group.finish();
}

fn kernel_product(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_product");
    for m in [2, 3, 4] {
        let g = grid(m, 1, 2);
        let (s, t) = (kernel(&g, 1), kernel(&g, 2));
        group.bench_with_input(BenchmarkId::from_parameter(m), &(s, t), |b, (s, t)| b.iter(|| s.product(t).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, representation, kernel_product);
criterion_main!(benches);
