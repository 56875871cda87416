//! Low-rank factor construction and preconditioner application.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kis_bench::anova_fixture;
use kis_core::pipeline::build_factor;
use kis_core::saddle::Preconditioner;
use kis_core::{Backend, FactorMethod, FastsumConfig, PrecondConfig};

const METHODS: [FactorMethod; 5] = [
    FactorMethod::CholeskyGreedy,
    FactorMethod::CholeskyRandom,
    FactorMethod::NystromColumns,
    FactorMethod::NystromGaussian,
    FactorMethod::Rff,
];

fn config(method: FactorMethod, rank: usize) -> PrecondConfig {
    PrecondConfig {
        method: Some(method),
        rank,
        ..PrecondConfig::default()
    }
}

fn factor_build(c: &mut Criterion) {
    let (data, spec) = anova_fixture(2_000, 3);
    let backend = Backend::Fast(FastsumConfig::default());
    let mut group = c.benchmark_group("factor");
    group.sample_size(10);
    for method in METHODS {
        for rank in [50, 200] {
            group.bench_function(BenchmarkId::new(method.name(), rank), |b| {
                b.iter(|| {
                    build_factor(&data.points, &spec, backend, &config(method, rank)).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn smw_apply(c: &mut Criterion) {
    let (data, spec) = anova_fixture(4_000, 4);
    let backend = Backend::Fast(FastsumConfig::default());
    let n = data.len();
    let theta: Vec<f64> = (0..n).map(|i| 0.5 + (i % 7) as f64).collect();
    let g: Vec<f64> = (0..=n).map(|i| (i as f64).sin()).collect();
    let mut group = c.benchmark_group("smw");
    group.sample_size(20);
    for rank in [50, 200, 1000] {
        let factor = build_factor(
            &data.points,
            &spec,
            backend,
            &config(FactorMethod::CholeskyGreedy, rank),
        )
        .unwrap();
        let mut p = Preconditioner::low_rank(&factor, &data.labels).unwrap();
        group.bench_function(BenchmarkId::new("refresh", rank), |b| {
            b.iter(|| p.refresh(&theta).unwrap())
        });
        p.refresh(&theta).unwrap();
        group.bench_function(BenchmarkId::new("apply", rank), |b| b.iter(|| p.apply(&g)));
    }
    group.finish();
}

criterion_group!(benches, factor_build, smw_apply);
criterion_main!(benches);
