//! Fast summation against the direct kernel product.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kis_bench::{anova_fixture, window_points};
use kis_core::fastsum::FastsumPlan;
use kis_core::pipeline::DirectGaussianOperator;
use kis_core::{FastsumConfig, GaussianKernel, KernelOperator};

fn matvec(c: &mut Criterion) {
    let kernel = GaussianKernel::new(1.0).unwrap();
    let config = FastsumConfig::default();
    let mut group = c.benchmark_group("matvec");
    group.sample_size(10);
    for n in [1_000, 4_000, 16_000] {
        let (data, _) = anova_fixture(n, 1);
        let v: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -0.5 })
            .collect();
        for dim in [1, 2, 3] {
            let points = window_points(&data, dim);
            let plan = FastsumPlan::new(&points, kernel, &config).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("fast-d{dim}"), n), &v, |b, v| {
                b.iter(|| plan.apply(v).unwrap())
            });
            if n <= 4_000 {
                let direct = DirectGaussianOperator::new(points, kernel);
                group.bench_with_input(
                    BenchmarkId::new(format!("direct-d{dim}"), n),
                    &v,
                    |b, v| b.iter(|| direct.apply(v)),
                );
            }
        }
    }
    group.finish();
}

fn plan_setup(c: &mut Criterion) {
    let kernel = GaussianKernel::new(1.0).unwrap();
    let config = FastsumConfig::default();
    let (data, _) = anova_fixture(16_000, 2);
    let mut group = c.benchmark_group("plan");
    group.sample_size(10);
    for dim in [1, 2, 3] {
        let points = window_points(&data, dim);
        group.bench_function(BenchmarkId::new("setup", dim), |b| {
            b.iter(|| FastsumPlan::new(&points, kernel, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, matvec, plan_setup);
criterion_main!(benches);
