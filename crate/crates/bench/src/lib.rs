//! Shared fixtures for the benchmarks.

use kis_core::data::{zscore_fit_transform, FeatureWindowing};
use kis_core::kernel::{AnovaKernel, WindowPoints};
use kis_core::synthetic::anova_problem;
use kis_core::Dataset;

/// A z-scored ANOVA classification problem with two 3-feature windows.
pub fn anova_fixture(n: usize, seed: u64) -> (Dataset, AnovaKernel) {
    let raw = anova_problem(n, 6, seed).expect("valid problem size");
    let (data, _) = zscore_fit_transform(&raw, &raw).expect("non-empty data");
    let windowing =
        FeatureWindowing::new(vec![vec![0, 1, 2], vec![3, 4, 5]], 6).expect("valid windows");
    let spec = AnovaKernel::new(windowing, 6).expect("windows fit the features");
    (data, spec)
}

/// The first `dim` features of `data` as a single window.
pub fn window_points(data: &Dataset, dim: usize) -> WindowPoints {
    WindowPoints::from_matrix(&data.points, &(0..dim).collect::<Vec<_>>())
}
