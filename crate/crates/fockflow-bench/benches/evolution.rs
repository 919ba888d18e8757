use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fockflow_bench::{grid, unitary_field};
use fockflow_core::evolution::{local_evolution, solve_evolution};
use fockflow_core::flows::{flow_kernel, InitialMap, StructureMap};
use fockflow_core::linalg::Col;
use fockflow_core::Mat;

fn local(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_evolution_apply");
    for m in [8, 12, 16] {
        let g = grid(m, 1, 1);
        let u = local_evolution(1.0, &unitary_field(&g, 3), &Mat::identity(1, 1));
        let v = Col::from_element(u.dim(), fockflow_core::linalg::c64(1.0, 0.0));
        group.bench_with_input(BenchmarkId::from_parameter(m), &(u, v), |b, (u, v)| b.iter(|| u.apply(v)));
    }
    group.finish();
}

fn dense(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_evolution");
    for m in [2, 4, 6] {
        let g = grid(m, 1, 2);
        let f = unitary_field(&g, 4);
        group.bench_with_input(BenchmarkId::from_parameter(m), &f, |b, f| b.iter(|| solve_evolution(1.0, f, &Mat::identity(2, 2))));
    }
    group.finish();
}

fn flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("flow_kernel");
    for m in [2, 3, 4] {
        let g = grid(m, 1, 2);
        let map = StructureMap::spatial(&unitary_field(&g, 5));
        let mut a = Mat::zeros(2, 2);
        a[(0, 1)] = fockflow_core::linalg::c64(1.0, 0.0);
        group.bench_with_input(BenchmarkId::from_parameter(m), &(map, a), |b, (map, a)| {
            b.iter(|| flow_kernel(1.0, map, &InitialMap::identity(2), a))
        });
    }
    group.finish();
}

criterion_group!(benches, local, dense, flow);
criterion_main!(benches);
