use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nystrom::safeguarded_ldl;
use super::*;
use crate::kernel::{
    dense_gaussian_matrix, DenseKernelOperator, GaussianKernel, KernelOperator, WindowPoints,
};

fn random_points(n: usize, d: usize, seed: u64) -> WindowPoints {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WindowPoints::new(d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn gaussian_operator(n: usize, d: usize, ell: f64, seed: u64) -> DenseKernelOperator {
    let pts = random_points(n, d, seed);
    let k = dense_gaussian_matrix(&pts, GaussianKernel::new(ell).unwrap(), usize::MAX).unwrap();
    DenseKernelOperator::from_matrix(k).unwrap()
}

fn spd_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut k = &a * a.transpose() / n as f64;
    for i in 0..n {
        k[(i, i)] += 0.5 + i as f64 / n as f64;
    }
    k
}

fn low_rank_matrix(n: usize, r: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose()
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn greedy_full_rank_matches_dense_cholesky() {
    let k = spd_matrix(100, 1);
    let op = DenseKernelOperator::from_matrix(k.clone()).unwrap();
    let f = pivoted_cholesky_greedy(&op, 100, 0.0).unwrap();
    assert_eq!(f.achieved_rank(), 100);
    assert!(rel_frobenius(&f.gram(), &k) <= 1e-10);

    // the pivoted factor is the dense Cholesky factor of the permuted matrix
    let p = &f.pivots;
    let permuted = DMatrix::from_fn(100, 100, |i, j| k[(p[i], p[j])]);
    let chol = permuted.cholesky().unwrap().l();
    let zp = DMatrix::from_fn(100, 100, |r, j| f.z[(r, p[j])]);
    assert!((zp.transpose() - chol).norm() <= 1e-10 * k.norm());
}

#[test]
fn greedy_first_pivot_is_largest_diagonal_and_ties_go_low() {
    let mut k = DMatrix::identity(4, 4);
    k[(2, 2)] = 3.0;
    let op = DenseKernelOperator::from_matrix(k).unwrap();
    let f = pivoted_cholesky_greedy(&op, 4, 0.0).unwrap();
    assert_eq!(f.pivots, vec![2, 0, 1, 3]);
}

#[test]
fn greedy_stops_on_exact_low_rank() {
    let k = low_rank_matrix(60, 5, 2);
    let op = DenseKernelOperator::from_matrix(k.clone()).unwrap();
    let f = pivoted_cholesky_greedy(&op, 30, 1e-9).unwrap();
    assert_eq!(f.achieved_rank(), 5);
    assert!(rel_frobenius(&f.gram(), &k) <= 1e-8);
    assert!(f.trace_residual.unwrap().abs() <= 1e-8);
}

#[test]
fn greedy_residual_trace_is_exact_complement() {
    let op = gaussian_operator(150, 2, 0.5, 3);
    let trace: f64 = op.diagonal().iter().sum();
    for rank in [1, 5, 20, 40] {
        let f = pivoted_cholesky_greedy(&op, rank, 0.0).unwrap();
        let expected = trace - f.z.norm_squared();
        assert!((f.trace_residual.unwrap() - expected).abs() <= 1e-10 * trace);
    }
}

#[test]
fn greedy_error_decreases_with_rank() {
    let op = gaussian_operator(300, 2, 0.7, 4);
    let k = op.matrix().clone();
    let errs: Vec<f64> = [10, 20, 50]
        .iter()
        .map(|&r| rel_frobenius(&pivoted_cholesky_greedy(&op, r, 0.0).unwrap().gram(), &k))
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn greedy_on_identity_picks_basis_vectors() {
    let op = DenseKernelOperator::from_matrix(DMatrix::identity(3, 3)).unwrap();
    let f = pivoted_cholesky_greedy(&op, 2, 0.0).unwrap();
    assert_eq!(f.pivots, vec![0, 1]);
    assert_eq!(
        f.z,
        DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    );
    assert_eq!(f.trace_residual, Some(1.0));
}

#[test]
fn greedy_is_exact_on_rank_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = nalgebra::DVector::from_fn(50, |_, _| rng.random_range(-1.0..1.0));
    let k = &z * z.transpose();
    let op = DenseKernelOperator::from_matrix(k.clone()).unwrap();
    let f = pivoted_cholesky_greedy(&op, 10, 1e-12).unwrap();
    assert_eq!(f.achieved_rank(), 1);
    assert!((f.gram() - k).norm() <= 1e-10);
}

#[test]
fn cholesky_rejects_indefinite_operator() {
    let mut k = DMatrix::identity(3, 3);
    k[(0, 1)] = 2.0;
    k[(1, 0)] = 2.0;
    let op = DenseKernelOperator::from_matrix(k).unwrap();
    assert!(matches!(
        pivoted_cholesky_greedy(&op, 3, 0.0),
        Err(Error::NotPositiveSemidefinite { .. })
    ));
    let neg = DenseKernelOperator::from_matrix(-DMatrix::<f64>::identity(2, 2)).unwrap();
    assert!(matches!(
        pivoted_cholesky_random(&neg, 2, 0),
        Err(Error::NotPositiveSemidefinite { .. })
    ));
}

#[test]
fn random_pivoting_exits_early_on_exact_low_rank() {
    let k = low_rank_matrix(80, 6, 5);
    let op = DenseKernelOperator::from_matrix(k.clone()).unwrap();
    let f = pivoted_cholesky_random(&op, 40, 9).unwrap();
    assert_eq!(f.achieved_rank(), 6);
    assert!(rel_frobenius(&f.gram(), &k) <= 1e-8);
    let again = pivoted_cholesky_random(&op, 40, 9).unwrap();
    assert_eq!(f.pivots, again.pivots);
}

#[test]
fn random_pivoting_approximates_smooth_kernel() {
    let op = gaussian_operator(200, 2, 0.7, 6);
    let f = pivoted_cholesky_random(&op, 60, 1).unwrap();
    assert!(rel_frobenius(&f.gram(), op.matrix()) < 1e-3);
    let trace: f64 = op.diagonal().iter().sum();
    assert!((f.trace_residual.unwrap() - (trace - f.z.norm_squared())).abs() <= 1e-10 * trace);
}

#[test]
fn random_pivoting_on_identity() {
    let n = 12;
    let op = DenseKernelOperator::from_matrix(DMatrix::identity(n, n)).unwrap();
    for seed in 0..5 {
        let f = pivoted_cholesky_random(&op, 7, seed).unwrap();
        assert_eq!(f.achieved_rank(), 7);
        assert!((&f.z * f.z.transpose() - DMatrix::<f64>::identity(7, 7)).norm() <= 1e-14);
        assert!((f.trace_residual.unwrap() - (n - 7) as f64).abs() <= 1e-12);
    }
}

#[test]
fn rank_zero_is_rejected() {
    let op = gaussian_operator(10, 1, 1.0, 0);
    assert!(pivoted_cholesky_greedy(&op, 0, 0.0).is_err());
    assert!(nystrom(&op, 0, NystromMode::Columns, 0, DEFAULT_LDL_THRESHOLD).is_err());
    assert!(nystrom(&op, 11, NystromMode::Gaussian, 0, DEFAULT_LDL_THRESHOLD).is_err());
    assert!(random_fourier_features(
        &random_points(10, 1, 0),
        GaussianKernel::new(1.0).unwrap(),
        0,
        0
    )
    .is_err());
}

#[test]
fn nystrom_columns_reproduce_sampled_columns() {
    let op = DenseKernelOperator::from_matrix(spd_matrix(90, 7)).unwrap();
    let f = nystrom(&op, 25, NystromMode::Columns, 3, DEFAULT_LDL_THRESHOLD).unwrap();
    let g = f.gram();
    assert_eq!(f.pivots.len(), 25);
    let mut sorted = f.pivots.clone();
    sorted.dedup();
    assert_eq!(sorted.len(), 25);
    for &j in &f.pivots {
        for i in 0..90 {
            assert!(
                (g[(i, j)] - op.matrix()[(i, j)]).abs() <= 1e-8,
                "column {j}"
            );
        }
    }
}

#[test]
fn nystrom_gaussian_is_exact_on_low_rank() {
    let k = low_rank_matrix(70, 8, 8);
    let op = DenseKernelOperator::from_matrix(k.clone()).unwrap();
    let f = nystrom(&op, 8, NystromMode::Gaussian, 4, DEFAULT_LDL_THRESHOLD).unwrap();
    assert!(rel_frobenius(&f.gram(), &k) <= 1e-8);
}

#[test]
fn nystrom_gaussian_approximates_smooth_kernel() {
    let op = gaussian_operator(200, 2, 0.7, 9);
    let f = nystrom(&op, 60, NystromMode::Gaussian, 2, DEFAULT_LDL_THRESHOLD).unwrap();
    assert!(rel_frobenius(&f.gram(), op.matrix()) < 1e-3);
    assert!(f.gram().symmetric_eigenvalues().iter().all(|&e| e >= -1e-8));
}

#[test]
fn nystrom_gaussian_is_near_best_low_rank() {
    let op = gaussian_operator(300, 2, 0.7, 22);
    let k = op.matrix().clone();
    let mut eig: Vec<f64> = k.clone().symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let best = eig[50..].iter().map(|e| e * e).sum::<f64>().sqrt();
    let f = nystrom(&op, 50, NystromMode::Gaussian, 5, DEFAULT_LDL_THRESHOLD).unwrap();
    let err = (f.gram() - &k).norm();
    assert!(err <= 10.0 * best, "{err} vs best {best}");
}

#[test]
fn nystrom_columns_on_identity_is_a_projector() {
    let n = 20;
    let op = DenseKernelOperator::from_matrix(DMatrix::identity(n, n)).unwrap();
    for k in [1, 6, 20] {
        let f = nystrom(&op, k, NystromMode::Columns, 7, DEFAULT_LDL_THRESHOLD).unwrap();
        let g = f.gram();
        let want = DMatrix::from_fn(n, n, |i, j| {
            if i == j && f.pivots.contains(&i) {
                1.0
            } else {
                0.0
            }
        });
        assert!((g - want).norm() <= 1e-12);
    }
}

#[test]
fn ldl_reproduces_positive_definite_matrix() {
    let c = spd_matrix(12, 10);
    let (l, d) = safeguarded_ldl(&c, 1e-8);
    let rebuilt = &l * DMatrix::from_diagonal(&d.into()) * l.transpose();
    assert!(rel_frobenius(&rebuilt, &c) <= 1e-12);
}

#[test]
fn ldl_replaces_small_pivots_keeping_sign() {
    let c = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, -1e-12]);
    let (_, d) = safeguarded_ldl(&c, 1e-6);
    assert_eq!(d[0], 1.0);
    assert_eq!(d[1], 1e-6);
    assert_eq!(d[2], -1e-6);
}

fn probe_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .collect()
}

fn rff_mean_error(
    pts: &WindowPoints,
    kernel: GaussianKernel,
    pairs: &[(usize, usize)],
    rank: usize,
) -> f64 {
    let seeds = 20u64;
    let total: f64 = (0..seeds)
        .map(|s| {
            let z = random_fourier_features(pts, kernel, rank, 1000 + s)
                .unwrap()
                .z;
            pairs
                .iter()
                .map(|&(i, j)| {
                    (z.column(i).dot(&z.column(j)) - kernel.eval(pts.point(i), pts.point(j))).abs()
                })
                .sum::<f64>()
                / pairs.len() as f64
        })
        .sum();
    total / seeds as f64
}

#[test]
fn rff_error_decays_like_monte_carlo() {
    let pts = random_points(120, 2, 11);
    let kernel = GaussianKernel::new(0.8).unwrap();
    let pairs = probe_pairs(120, 100, 1);
    let e256 = rff_mean_error(&pts, kernel, &pairs, 256);
    let e512 = rff_mean_error(&pts, kernel, &pairs, 512);
    let e1024 = rff_mean_error(&pts, kernel, &pairs, 1024);
    let band = 0.5 / 2f64.sqrt() * 1.5..=0.5 * 2f64.sqrt() * 1.5;
    assert!(
        band.contains(&(e512 / e256)),
        "doubling ratio {}",
        e512 / e256
    );
    assert!(
        (0.35..=0.71).contains(&(e1024 / e256)),
        "quadrupling ratio {}",
        e1024 / e256
    );
}

#[test]
fn rff_diagonal_concentrates_at_one() {
    let pts = random_points(100, 2, 23);
    let f = random_fourier_features(&pts, GaussianKernel::new(1.0).unwrap(), 4096, 3).unwrap();
    for j in 0..100 {
        let d = f.z.column(j).norm_squared();
        assert!((d - 1.0).abs() <= 0.1, "diag {d}");
    }
}

#[test]
fn rff_entries_are_close_at_4096_features() {
    let pts = random_points(100, 3, 24);
    let kernel = GaussianKernel::new(1.0).unwrap();
    let z = random_fourier_features(&pts, kernel, 4096, 4).unwrap().z;
    let worst = probe_pairs(100, 100, 2)
        .into_iter()
        .map(|(i, j)| {
            (z.column(i).dot(&z.column(j)) - kernel.eval(pts.point(i), pts.point(j))).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 0.1, "worst {worst}");
}

#[test]
fn rff_rows_have_expected_shape_and_bound() {
    let pts = random_points(30, 3, 12);
    let f = random_fourier_features(&pts, GaussianKernel::new(1.0).unwrap(), 16, 0).unwrap();
    assert_eq!((f.z.nrows(), f.z.ncols()), (16, 30));
    let bound = (2.0f64 / 16.0).sqrt() + 1e-15;
    assert!(f.z.iter().all(|v| v.abs() <= bound));
}

#[test]
fn stacked_apply_matches_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 40;
    let weights = [0.2, 0.5, 0.3];
    let factors: Vec<LowRankFactor> = [3, 5, 2]
        .iter()
        .map(|&k| LowRankFactor {
            z: DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0)),
            method: FactorMethod::CholeskyGreedy,
            requested_rank: k,
            trace_residual: None,
            pivots: Vec::new(),
        })
        .collect();
    let stacked = stack_anova_factors(&factors, &weights).unwrap();
    assert_eq!(stacked.rank(), 10);
    assert_eq!(stacked.block_ranks(), &[3, 5, 2]);
    let dense = factors
        .iter()
        .zip(weights)
        .fold(DMatrix::zeros(n, n), |acc, (f, w)| acc + f.gram() * w);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let got = stacked.apply(&v);
    let want = &dense * nalgebra::DVector::from_vec(v);
    let err: f64 = got
        .iter()
        .zip(want.iter())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(err <= 1e-12 * want.norm());
}

#[test]
fn stacking_single_and_zero_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let n = 15;
    let block = |k: usize, rng: &mut ChaCha8Rng| LowRankFactor {
        z: DMatrix::from_fn(k, n, |_, _| rng.random_range(-1.0..1.0)),
        method: FactorMethod::NystromColumns,
        requested_rank: k,
        trace_residual: None,
        pivots: Vec::new(),
    };
    let z1 = block(4, &mut rng);
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let single = stack_anova_factors(std::slice::from_ref(&z1), &[1.0]).unwrap();
    assert_eq!(single.matrix(), &z1.z);
    assert_eq!(single.apply(&v), z1.apply(&v));

    let mut z2 = block(3, &mut rng);
    z2.z.fill(0.0);
    let stacked = stack_anova_factors(&[z1.clone(), z2], &[0.7, 0.3]).unwrap();
    let want: Vec<f64> = z1.apply(&v).iter().map(|x| 0.7 * x).collect();
    for (a, b) in stacked.apply(&v).iter().zip(&want) {
        assert!((a - b).abs() <= 1e-13);
    }
}

#[test]
fn stacking_checks_shapes() {
    let f = |n| LowRankFactor {
        z: DMatrix::zeros(2, n),
        method: FactorMethod::Rff,
        requested_rank: 2,
        trace_residual: None,
        pivots: Vec::new(),
    };
    assert!(stack_anova_factors(&[f(3), f(4)], &[0.5, 0.5]).is_err());
    assert!(stack_anova_factors(&[f(3)], &[0.5, 0.5]).is_err());
    assert!(stack_anova_factors(&[f(3)], &[-1.0]).is_err());
}

#[test]
fn method_names_round_trip() {
    for m in FactorMethod::ALL {
        assert_eq!(m.name().parse::<FactorMethod>().unwrap(), m);
    }
    assert!("svd".parse::<FactorMethod>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn factors_are_psd_and_dominated_by_kernel(seed in 0u64..1000, rank in 1usize..20) {
        let op = gaussian_operator(40, 2, 0.6, seed);
        let k = op.matrix();
        for f in [
            pivoted_cholesky_greedy(&op, rank, 0.0).unwrap(),
            pivoted_cholesky_random(&op, rank, seed).unwrap(),
        ] {
            // K - Z^T Z is the Schur complement, hence PSD
            let rest = k - f.gram();
            let min = rest.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-9, "{} min eigenvalue {min}", f.method);
        }
        let ny = nystrom(&op, rank, NystromMode::Columns, seed, DEFAULT_LDL_THRESHOLD).unwrap();
        prop_assert!(ny.gram().symmetric_eigenvalues().min() >= -1e-9);
    }

    #[test]
    fn greedy_trace_residual_is_monotone(seed in 0u64..1000) {
        let op = gaussian_operator(50, 3, 1.0, seed);
        let mut last = f64::INFINITY;
        for rank in [1, 2, 4, 8, 16] {
            let t = pivoted_cholesky_greedy(&op, rank, 0.0).unwrap().trace_residual.unwrap();
            prop_assert!(t <= last + 1e-12);
            prop_assert!(t >= -1e-9);
            last = t;
        }
    }
}
