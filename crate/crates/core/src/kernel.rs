//! Gaussian and additive (ANOVA) Gaussian kernels, exact dense assembly and
//! the operator abstraction every matvec backend implements.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::FeatureWindowing;
use crate::error::{Error, Result};

/// Largest point count for which a dense `n x n` kernel matrix is built.
pub const DEFAULT_DENSE_LIMIT: usize = 20_000;

/// `k(x, x') = exp(-|x - x'|^2 / l^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub length_scale: f64,
}

impl GaussianKernel {
    pub fn new(length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::Config(format!(
                "length-scale {length_scale} must be positive"
            )));
        }
        Ok(Self { length_scale })
    }

    #[inline]
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), x2.len());
        self.eval_sq_dist(squared_distance(x, x2))
    }

    #[inline]
    pub fn eval_sq_dist(&self, r2: f64) -> f64 {
        (-r2 / (self.length_scale * self.length_scale)).exp()
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Weighted sum of Gaussians, each acting on one feature window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaKernel {
    pub windowing: FeatureWindowing,
}

impl AnovaKernel {
    pub fn new(windowing: FeatureWindowing, d: usize) -> Result<Self> {
        windowing.validate(d)?;
        Ok(Self { windowing })
    }

    pub fn num_windows(&self) -> usize {
        self.windowing.len()
    }

    pub fn window_kernel(&self, l: usize) -> GaussianKernel {
        GaussianKernel {
            length_scale: self.windowing.length_scales[l],
        }
    }

    /// `k(x, x)`, the sum of the window weights.
    pub fn diagonal_value(&self) -> f64 {
        self.windowing.weights.iter().sum()
    }

    pub fn eval(&self, x: &[f64], x2: &[f64]) -> f64 {
        let w = &self.windowing;
        w.windows
            .iter()
            .zip(&w.weights)
            .zip(&w.length_scales)
            .map(|((win, eta), ell)| {
                let r2: f64 = win.iter().map(|&j| (x[j] - x2[j]).powi(2)).sum();
                eta * (-r2 / (ell * ell)).exp()
            })
            .sum()
    }
}

/// The coordinates of every point restricted to one feature window, stored
/// contiguously (`n x dim`, row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowPoints {
    dim: usize,
    coords: Vec<f64>,
}

impl WindowPoints {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len(),
            });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_matrix(points: &DMatrix<f64>, window: &[usize]) -> Self {
        let n = points.nrows();
        let mut coords = Vec::with_capacity(n * window.len());
        for i in 0..n {
            coords.extend(window.iter().map(|&j| points[(i, j)]));
        }
        Self {
            dim: window.len(),
            coords,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Symmetric positive semidefinite kernel matrix accessed through its action.
///
/// Implementations are immutable after construction and safe to apply from
/// several threads at once.
pub trait KernelOperator: Send + Sync {
    fn size(&self) -> usize;

    /// `K v`. Panics if `v.len() != self.size()`.
    fn apply(&self, v: &[f64]) -> Vec<f64>;

    /// The single entry `K[i, j]`, evaluated directly.
    fn entry(&self, i: usize, j: usize) -> f64;

    fn column(&self, j: usize) -> Vec<f64> {
        (0..self.size()).map(|i| self.entry(i, j)).collect()
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.entry(i, i)).collect()
    }
}

impl<T: KernelOperator + ?Sized> KernelOperator for &T {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        (**self).apply(v)
    }
    fn entry(&self, i: usize, j: usize) -> f64 {
        (**self).entry(i, j)
    }
    fn column(&self, j: usize) -> Vec<f64> {
        (**self).column(j)
    }
    fn diagonal(&self) -> Vec<f64> {
        (**self).diagonal()
    }
}

fn check_dense_size(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::TooLarge { n, limit });
    }
    Ok(())
}

/// Dense ANOVA kernel matrix of the rows of `points`. Only the upper
/// triangle is evaluated; the lower one is mirrored, so the result is
/// exactly symmetric.
pub fn dense_kernel_matrix(
    points: &DMatrix<f64>,
    spec: &AnovaKernel,
    limit: usize,
) -> Result<DMatrix<f64>> {
    let n = points.nrows();
    check_dense_size(n, limit)?;
    spec.windowing.validate(points.ncols())?;
    let mut k = DMatrix::zeros(n, n);
    for (l, window) in spec.windowing.windows.iter().enumerate() {
        let wp = WindowPoints::from_matrix(points, window);
        accumulate_gaussian(
            &mut k,
            &wp,
            spec.window_kernel(l),
            spec.windowing.weights[l],
        );
    }
    Ok(k)
}

/// Dense Gaussian kernel matrix of window-restricted points.
pub fn dense_gaussian_matrix(
    points: &WindowPoints,
    kernel: GaussianKernel,
    limit: usize,
) -> Result<DMatrix<f64>> {
    check_dense_size(points.len(), limit)?;
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    accumulate_gaussian(&mut k, points, kernel, 1.0);
    Ok(k)
}

fn accumulate_gaussian(
    k: &mut DMatrix<f64>,
    wp: &WindowPoints,
    kernel: GaussianKernel,
    weight: f64,
) {
    let n = wp.len();
    for j in 0..n {
        let xj = wp.point(j);
        for i in 0..=j {
            let v = weight * kernel.eval(wp.point(i), xj);
            k[(i, j)] += v;
            if i != j {
                k[(j, i)] += v;
            }
        }
    }
}

/// Exact backend: a materialized kernel matrix.
#[derive(Debug, Clone)]
pub struct DenseKernelOperator {
    matrix: DMatrix<f64>,
}

impl DenseKernelOperator {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

/// The exact ANOVA kernel operator over the rows of `points`.
pub fn exact_operator(points: &DMatrix<f64>, spec: &AnovaKernel) -> Result<DenseKernelOperator> {
    exact_operator_with_limit(points, spec, DEFAULT_DENSE_LIMIT)
}

pub fn exact_operator_with_limit(
    points: &DMatrix<f64>,
    spec: &AnovaKernel,
    limit: usize,
) -> Result<DenseKernelOperator> {
    DenseKernelOperator::from_matrix(dense_kernel_matrix(points, spec, limit)?)
}

impl KernelOperator for DenseKernelOperator {
    fn size(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size(), "operator size mismatch");
        let v = DVector::from_column_slice(v);
        (&self.matrix * v).data.into()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.matrix.column(j).iter().copied().collect()
    }
}

/// `sum_i v_i k(sources_i, target)` for every row of `targets`, by direct
/// evaluation.
pub fn cross_kernel_apply(
    sources: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    spec: &AnovaKernel,
    v: &[f64],
) -> Result<Vec<f64>> {
    if v.len() != sources.nrows() {
        return Err(Error::DimensionMismatch {
            expected: sources.nrows(),
            got: v.len(),
        });
    }
    if targets.ncols() != sources.ncols() {
        return Err(Error::DimensionMismatch {
            expected: sources.ncols(),
            got: targets.ncols(),
        });
    }
    let mut out = vec![0.0; targets.nrows()];
    for (l, window) in spec.windowing.windows.iter().enumerate() {
        let src = WindowPoints::from_matrix(sources, window);
        let tgt = WindowPoints::from_matrix(targets, window);
        let kern = spec.window_kernel(l);
        let eta = spec.windowing.weights[l];
        for (t, o) in out.iter_mut().enumerate() {
            let xt = tgt.point(t);
            let s: f64 = (0..src.len())
                .map(|i| v[i] * kern.eval(src.point(i), xt))
                .sum();
            *o += eta * s;
        }
    }
    Ok(out)
}
