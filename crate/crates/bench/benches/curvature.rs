use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wcurvlab_bench::random_torus;
use wcurvlab_core::weighted::{bianchi_defect, weighted_package, weighted_scalar};

fn scalar(c: &mut Criterion) {
    let mut group = c.benchmark_group("weighted_scalar_t3");
    for n in [12, 16, 24] {
        let space = random_torus(n, 3, 1.5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &space, |b, s| {
            b.iter(|| weighted_scalar(s).unwrap())
        });
    }
    group.finish();
}

fn package(c: &mut Criterion) {
    let space = random_torus(16, 3, 2.0);
    c.bench_function("weighted_package_t3_16", |b| {
        b.iter(|| weighted_package(&space).unwrap())
    });
    c.bench_function("bianchi_defect_t3_16", |b| {
        b.iter(|| bianchi_defect(&space).unwrap())
    });
}

criterion_group!(benches, scalar, package);
criterion_main!(benches);
