use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{Dataset, FeatureWindowing};
use crate::kernel::{dense_gaussian_matrix, exact_operator, DEFAULT_DENSE_LIMIT};

/// Uniform points, z-scored per column.
fn zscored(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m: DMatrix<f64> = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0));
    for mut col in m.column_iter_mut() {
        let mean = col.mean();
        let sd = col.variance().sqrt();
        col.apply(|x| *x = (*x - mean) / sd);
    }
    m
}

fn window_points(n: usize, d: usize, seed: u64) -> WindowPoints {
    let m = zscored(n, d, seed);
    WindowPoints::from_matrix(&m, &(0..d).collect::<Vec<_>>())
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

fn dense_apply(points: &WindowPoints, kernel: GaussianKernel, v: &[f64]) -> Vec<f64> {
    let k = dense_gaussian_matrix(points, kernel, DEFAULT_DENSE_LIMIT).unwrap();
    (k * nalgebra::DVector::from_column_slice(v)).data.into()
}

fn config(bandwidth: usize) -> FastsumConfig {
    FastsumConfig {
        bandwidth,
        ..FastsumConfig::default()
    }
}

#[test]
fn coefficients_are_even_in_one_dimension() {
    let pts = window_points(50, 1, 1);
    let plan = FastsumPlan::new(&pts, GaussianKernel::new(1.0).unwrap(), &config(16)).unwrap();
    for j in 1..8i64 {
        let (a, b) = (plan.coefficient(&[j]), plan.coefficient(&[-j]));
        assert!((a - b).abs() <= 1e-15, "b_{j} = {a}, b_-{j} = {b}");
    }
    assert!(plan.coefficients().iter().all(|&c| c > -1e-12));
}

#[test]
fn approximant_at_zero_is_one() {
    let coef = gaussian_coefficients(0.1, 32, 1);
    let sum: f64 = coef.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-6, "sum = {sum}");

    let pts = window_points(30, 2, 2);
    let plan = FastsumPlan::new(&pts, GaussianKernel::new(1.0).unwrap(), &config(32)).unwrap();
    let direct = plan.approximant_at(&[0.0, 0.0]);
    let total: f64 = plan.coefficients().iter().sum();
    assert!((direct - total).abs() < 1e-12);
    assert!((direct - 1.0).abs() < 1e-6);
}

#[test]
fn scaling_maps_bounding_box_into_ball() {
    for d in 1..=3 {
        let pts = window_points(200, d, 3 + d as u64);
        let cfg = FastsumConfig::default();
        let plan = FastsumPlan::new(&pts, GaussianKernel::new(0.7).unwrap(), &cfg).unwrap();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for i in 0..pts.len() {
            for t in 0..d {
                lo[t] = lo[t].min(pts.point(i)[t]);
                hi[t] = hi[t].max(pts.point(i)[t]);
            }
        }
        // every corner of the box, hence the whole box, lands inside radius r_T
        for mask in 0..(1usize << d) {
            let corner: Vec<f64> = (0..d)
                .map(|t| if mask >> t & 1 == 1 { hi[t] } else { lo[t] })
                .collect();
            let mut x = vec![0.0; d];
            plan.scaling().map_into(&corner, &mut x);
            assert!(norm(&x) <= cfg.torus_radius + 1e-15);
        }
        for i in 0..pts.len() {
            let mut x = vec![0.0; d];
            plan.scaling().map_into(pts.point(i), &mut x);
            assert!(norm(&x) <= cfg.torus_radius / cfg.margin + 1e-12);
        }
    }
}

#[test]
fn zero_vector_maps_to_zero() {
    let pts = window_points(100, 2, 4);
    let plan = FastsumPlan::new(&pts, GaussianKernel::new(1.0).unwrap(), &config(32)).unwrap();
    assert!(plan
        .apply(&vec![0.0; 100])
        .unwrap()
        .iter()
        .all(|&x| x == 0.0));
}

#[test]
fn two_dimensional_apply_matches_dense() {
    let pts = window_points(500, 2, 5);
    let kern = GaussianKernel::new(1.0).unwrap();
    let plan = FastsumPlan::new(&pts, kern, &FastsumConfig::default()).unwrap();
    let v = random_vec(500, 6);
    let err = rel_err(&plan.apply(&v).unwrap(), &dense_apply(&pts, kern, &v));
    assert!(err <= 1e-4, "relative error {err:e}");
}

#[test]
fn unit_vectors_reproduce_kernel_columns() {
    let pts = window_points(200, 1, 7);
    let kern = GaussianKernel::new(1.0).unwrap();
    let plan = FastsumPlan::new(&pts, kern, &FastsumConfig::default()).unwrap();
    for k in [0, 57, 199] {
        let mut e = vec![0.0; 200];
        e[k] = 1.0;
        let col = plan.apply(&e).unwrap();
        let worst = (0..200)
            .map(|i| (col[i] - kern.eval(pts.point(i), pts.point(k))).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "column {k}: max error {worst:e}");
    }
}

#[test]
fn cross_apply_on_sources_matches_apply() {
    let pts = window_points(300, 3, 8);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.2).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    let v = random_vec(300, 9);
    let a = plan.apply(&v).unwrap();
    let b = plan.apply_cross(&pts, &v).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn cross_apply_self_interaction_is_one() {
    let pts = window_points(150, 2, 10);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    let target = WindowPoints::new(2, pts.point(42).to_vec()).unwrap();
    let mut e = vec![0.0; 150];
    e[42] = 1.0;
    let got = plan.apply_cross(&target, &e).unwrap()[0];
    assert!((got - 1.0).abs() <= 1e-4, "got {got}");
}

#[test]
fn cross_apply_matches_dense_cross_matrix() {
    let pts = window_points(400, 2, 11);
    let kern = GaussianKernel::new(1.0).unwrap();
    let plan = FastsumPlan::new(&pts, kern, &FastsumConfig::default()).unwrap();
    // targets drawn from the same distribution, shrunk to stay in the domain
    let targets = zscored(100, 2, 12).map(|x| 0.9 * x);
    let targets = WindowPoints::from_matrix(&targets, &[0, 1]);
    assert!(plan.out_of_domain(&targets).is_empty());
    let v = random_vec(400, 13);
    let want: Vec<f64> = (0..100)
        .map(|t| {
            (0..400)
                .map(|i| v[i] * kern.eval(pts.point(i), targets.point(t)))
                .sum()
        })
        .collect();
    let err = rel_err(&plan.apply_cross(&targets, &v).unwrap(), &want);
    assert!(err <= 1e-4, "relative error {err:e}");
}

#[test]
fn out_of_domain_targets_are_rejected() {
    let pts = window_points(100, 2, 14);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    let far = WindowPoints::new(2, vec![0.0, 0.0, 40.0, 0.0]).unwrap();
    assert_eq!(plan.out_of_domain(&far), vec![1]);
    assert!(matches!(
        plan.apply_cross(&far, &vec![1.0; 100]),
        Err(Error::TargetOutOfDomain { count: 1, .. })
    ));
    let replanned = FastsumPlan::with_extent(
        &pts,
        Some(&far),
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    assert!(replanned.out_of_domain(&far).is_empty());
}

#[test]
fn plan_errors() {
    let four = WindowPoints::new(4, vec![0.0; 8]).unwrap();
    assert!(matches!(
        FastsumPlan::new(
            &four,
            GaussianKernel::new(1.0).unwrap(),
            &FastsumConfig::default()
        ),
        Err(Error::WindowTooLarge(4))
    ));
    let pts = window_points(10, 1, 15);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    assert!(plan.apply(&[1.0; 3]).is_err());
    let odd = FastsumConfig {
        bandwidth: 31,
        ..FastsumConfig::default()
    };
    assert!(FastsumPlan::new(&pts, GaussianKernel::new(1.0).unwrap(), &odd).is_err());
}

#[test]
fn identical_points_are_allowed() {
    let pts = WindowPoints::new(2, vec![0.5; 20]).unwrap();
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    let out = plan.apply(&[1.0; 10]).unwrap();
    assert!(out.iter().all(|&x| (x - 10.0).abs() < 1e-3));
}

#[test]
fn anova_single_window_is_scaled_plan() {
    let m = zscored(200, 3, 16);
    let w = FeatureWindowing::single(3).unwrap();
    let mut w = w;
    w.weights = vec![0.4];
    let spec = AnovaKernel::new(w, 3).unwrap();
    let op = anova_fast_operator(&m, &spec, &FastsumConfig::default()).unwrap();
    let v = random_vec(200, 17);
    let plan_out = op.plans()[0].apply(&v).unwrap();
    let op_out = op.apply(&v);
    for (a, b) in op_out.iter().zip(&plan_out) {
        assert!((a - 0.4 * b).abs() <= 1e-15 * b.abs().max(1.0));
    }
}

#[test]
fn anova_operator_matches_exact() {
    let m = zscored(1000, 6, 18);
    let w = FeatureWindowing::new(vec![vec![0, 1, 2], vec![3, 4, 5]], 6)
        .unwrap()
        .with_length_scales(vec![1.0, 1.5])
        .unwrap();
    let spec = AnovaKernel::new(w, 6).unwrap();
    let fast = anova_fast_operator(&m, &spec, &FastsumConfig::default()).unwrap();
    let exact = exact_operator(&m, &spec).unwrap();
    let v = random_vec(1000, 19);
    let err = rel_err(&fast.apply(&v), &exact.apply(&v));
    assert!(err <= 1e-4, "relative error {err:e}");
    assert_eq!(fast.entry(4, 9), exact.entry(4, 9));

    // linearity
    let u = random_vec(1000, 20);
    let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
    let lhs = fast.apply(&uv);
    let rhs: Vec<f64> = fast
        .apply(&u)
        .iter()
        .zip(fast.apply(&v))
        .map(|(a, b)| a + b)
        .collect();
    assert!(rel_err(&lhs, &rhs) <= 1e-12);

    let too_big = FeatureWindowing {
        windows: vec![vec![0, 1, 2, 3]],
        weights: vec![1.0],
        length_scales: vec![1.0],
        mi_scores: vec![],
    };
    assert!(anova_fast_operator(
        &m,
        &AnovaKernel { windowing: too_big },
        &FastsumConfig::default()
    )
    .is_err());
}

#[test]
fn approximation_is_symmetric() {
    let pts = window_points(300, 2, 21);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(0.8).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    for seed in 0..5 {
        let u = random_vec(300, 100 + seed);
        let v = random_vec(300, 200 + seed);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = dot(&u, &plan.apply(&v).unwrap());
        let rhs = dot(&plan.apply(&u).unwrap(), &v);
        let scale = dot(&u, &u).sqrt() * dot(&v, &v).sqrt();
        assert!((lhs - rhs).abs() <= 1e-8 * scale);
    }
}

#[test]
fn error_decreases_with_bandwidth() {
    for d in 1..=2 {
        let pts = window_points(300, d, 22 + d as u64);
        let kern = GaussianKernel::new(1.0).unwrap();
        let v = random_vec(300, 24);
        let want = dense_apply(&pts, kern, &v);
        let errs: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&nb| {
                let plan = FastsumPlan::new(&pts, kern, &config(nb)).unwrap();
                let got = plan.apply(&v).unwrap();
                got.iter()
                    .zip(&want)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "d = {d}: {errs:?}");
    }
}

#[test]
fn plan_reuse_is_bit_identical() {
    let pts = window_points(250, 3, 25);
    let plan = FastsumPlan::new(
        &pts,
        GaussianKernel::new(1.0).unwrap(),
        &FastsumConfig::default(),
    )
    .unwrap();
    let v = random_vec(250, 26);
    assert_eq!(plan.apply(&v).unwrap(), plan.apply(&v).unwrap());
}

#[test]
fn planning_from_dataset_windows() {
    let m = zscored(60, 4, 27);
    let ds = Dataset::new(m, vec![1.0; 60]).unwrap();
    let wp = WindowPoints::from_matrix(&ds.points, &[3, 1]);
    assert_eq!(wp.point(5), &[ds.points[(5, 3)], ds.points[(5, 1)]]);
}
