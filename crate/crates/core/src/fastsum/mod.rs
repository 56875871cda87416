//! Fast summation of Gaussian kernel sums via trigonometric-polynomial
//! approximation of the kernel and nonequispaced FFTs.
//!
//! Each window's points are mapped affinely into a small ball on the torus
//! `[-1/2, 1/2)^d`. The (periodized) scaled Gaussian is replaced by its
//! trigonometric interpolant of bandwidth `N`, so that
//!
//! ```text
//! (K v)_j ~= sum_J b_J (sum_i v_i e^{-2 pi i J x_i}) e^{2 pi i J x_j}
//! ```
//!
//! The inner sums are an adjoint NFFT (spread, FFT, deconvolve) and the outer
//! sums a forward NFFT (deconvolve, inverse FFT, gather). One apply costs
//! `O(m^d n + (sigma N)^d log N)`.

mod nfft;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::Fft;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use self::nfft::{fft_nd, for_each_frequency, plan_pair, Footprints, GaussianWindow};
use crate::error::{Error, Result};
use crate::kernel::{AnovaKernel, GaussianKernel, KernelOperator, WindowPoints};

/// Kernel decay (in scaled length-scales) required between the data and its
/// nearest periodic image.
const IMAGE_SEPARATION: f64 = 3.5;

/// Estimated approximation error above which planning logs a warning.
const WARN_ERROR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastsumConfig {
    /// Bandwidth `N` per dimension (even).
    pub bandwidth: usize,
    /// Spreading half-width `m`.
    pub cutoff: usize,
    /// Grid oversampling factor; `oversampling * bandwidth` must be an even integer.
    pub oversampling: f64,
    /// Radius of the torus ball that sources and targets must stay in, `<= 1/4`.
    pub torus_radius: f64,
    /// Sources are scaled to `torus_radius / margin`, leaving room for
    /// prediction targets slightly outside the training data.
    pub margin: f64,
}

impl Default for FastsumConfig {
    fn default() -> Self {
        Self {
            bandwidth: 32,
            cutoff: 4,
            oversampling: 2.0,
            torus_radius: 0.2,
            margin: 1.2,
        }
    }
}

impl FastsumConfig {
    pub fn grid_size(&self) -> usize {
        (self.oversampling * self.bandwidth as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let n_os = self.oversampling * self.bandwidth as f64;
        if self.bandwidth < 2 || !self.bandwidth.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "bandwidth {} must be an even integer >= 2",
                self.bandwidth
            )));
        }
        if self.cutoff < 2 {
            return Err(Error::Config("window cutoff must be at least 2".into()));
        }
        if self.oversampling < 1.0
            || (n_os - n_os.round()).abs() > 1e-9
            || !(n_os.round() as usize).is_multiple_of(2)
        {
            return Err(Error::Config(format!(
                "oversampling {} times bandwidth {} must be an even integer",
                self.oversampling, self.bandwidth
            )));
        }
        if 2 * self.cutoff >= self.grid_size() {
            return Err(Error::Config("window cutoff too large for the grid".into()));
        }
        if !(self.torus_radius > 0.0 && self.torus_radius <= 0.25) {
            return Err(Error::Config("torus radius must lie in (0, 1/4]".into()));
        }
        if !(self.margin >= 1.0 && self.margin.is_finite()) {
            return Err(Error::Config("margin must be >= 1".into()));
        }
        Ok(())
    }
}

/// Affine map `x -> scale * (x - center)` into torus coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingMap {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl ScalingMap {
    pub fn map_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, &xi), &c) in out.iter_mut().zip(x).zip(&self.center) {
            *o = self.scale * (xi - c);
        }
    }

    fn map_all(&self, points: &WindowPoints) -> Vec<f64> {
        let d = points.dim();
        let mut out = vec![0.0; points.coords().len()];
        for (src, dst) in points.coords().chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            self.map_into(src, dst);
        }
        out
    }
}

/// Precomputed fast summation for one node set and one Gaussian kernel.
#[derive(Clone)]
pub struct FastsumPlan {
    sources: WindowPoints,
    kernel: GaussianKernel,
    config: FastsumConfig,
    scaling: ScalingMap,
    /// Scaled radius targets may occupy.
    domain_radius: f64,
    scaled_length_scale: f64,
    estimated_error: f64,
    window: GaussianWindow,
    footprints: Footprints,
    /// `b_J` over `I_N^d`, row-major starting at `J = (-N/2, ..)`.
    coefficients: Vec<f64>,
    /// `b_J` times both deconvolution factors, laid out on the oversampled grid.
    multiplier: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FastsumPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FastsumPlan")
            .field("nodes", &self.sources.len())
            .field("dim", &self.sources.dim())
            .field("kernel", &self.kernel)
            .field("config", &self.config)
            .field("scaling", &self.scaling)
            .field("scaled_length_scale", &self.scaled_length_scale)
            .field("estimated_error", &self.estimated_error)
            .finish()
    }
}

impl FastsumPlan {
    /// Plans fast Gaussian summation over `points` (window dimension `<= 3`).
    ///
    /// The scale is the largest one that keeps the sources inside radius
    /// `torus_radius / margin` and keeps the kernel's nearest periodic image
    /// `3.5` scaled length-scales away from every pairwise difference.
    pub fn new(
        points: &WindowPoints,
        kernel: GaussianKernel,
        config: &FastsumConfig,
    ) -> Result<Self> {
        Self::with_extent(points, None, kernel, config)
    }

    /// Like [`FastsumPlan::new`], sizing the domain so that `extra` points
    /// (future targets) fit as well.
    pub fn with_extent(
        points: &WindowPoints,
        extra: Option<&WindowPoints>,
        kernel: GaussianKernel,
        config: &FastsumConfig,
    ) -> Result<Self> {
        config.validate()?;
        let d = points.dim();
        if d > 3 {
            return Err(Error::WindowTooLarge(d));
        }
        if points.is_empty() {
            return Err(Error::Data(
                "fast summation needs at least one point".into(),
            ));
        }
        if let Some(e) = extra {
            if e.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: e.dim(),
                });
            }
        }

        let all = || {
            points
                .coords()
                .chunks_exact(d)
                .chain(extra.into_iter().flat_map(|e| e.coords().chunks_exact(d)))
        };
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in all() {
            for t in 0..d {
                lo[t] = lo[t].min(p[t]);
                hi[t] = hi[t].max(p[t]);
            }
        }
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let radius = all()
            .map(|p| crate::kernel::squared_distance(p, &center).sqrt())
            .fold(0.0, f64::max);
        let reach = if radius > 0.0 {
            config.margin * radius
        } else {
            1.0
        };
        let ell = kernel.length_scale;
        let scale = (config.torus_radius / reach).min(1.0 / (2.0 * reach + IMAGE_SEPARATION * ell));
        let scaling = ScalingMap { center, scale };
        let domain_radius = scale * reach;
        let scaled_ell = scale * ell;

        let big_n = config.bandwidth;
        let truncation = (-(std::f64::consts::PI * scaled_ell * big_n as f64 / 2.0).powi(2)).exp();
        let aliasing = (-((1.0 - 2.0 * domain_radius) / scaled_ell).powi(2)).exp();
        let estimated_error = truncation.max(aliasing);
        if estimated_error > WARN_ERROR {
            log::warn!(
                "fast summation accuracy is poor (estimated {estimated_error:.1e}): scaled \
                 length-scale {scaled_ell:.4} needs a larger bandwidth than {big_n}"
            );
        }

        let coefficients = gaussian_coefficients(scaled_ell, big_n, d);
        let n_os = config.grid_size();
        let window = GaussianWindow::new(n_os, config.cutoff, n_os as f64 / big_n as f64);
        let mut multiplier = vec![0.0; n_os.pow(d as u32)];
        let mut pos = 0;
        for_each_frequency(big_n, d, n_os, |k, offset| {
            let deconv: f64 = k.iter().map(|&kt| window.deconvolution(kt)).product();
            multiplier[offset] = coefficients[pos] * deconv * deconv;
            pos += 1;
        });

        let nodes = scaling.map_all(points);
        let footprints = Footprints::new(&nodes, d, &window);
        let (fft_forward, fft_inverse) = plan_pair(n_os);

        Ok(Self {
            sources: points.clone(),
            kernel,
            config: *config,
            scaling,
            domain_radius,
            scaled_length_scale: scaled_ell,
            estimated_error,
            window,
            footprints,
            coefficients,
            multiplier,
            fft_forward,
            fft_inverse,
        })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sources.dim()
    }

    pub fn kernel(&self) -> GaussianKernel {
        self.kernel
    }

    pub fn config(&self) -> &FastsumConfig {
        &self.config
    }

    pub fn scaling(&self) -> &ScalingMap {
        &self.scaling
    }

    /// Largest scaled radius a target may have.
    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    pub fn scaled_length_scale(&self) -> f64 {
        self.scaled_length_scale
    }

    /// A-priori estimate of the largest entrywise kernel error.
    pub fn estimated_error(&self) -> f64 {
        self.estimated_error
    }

    /// Fourier coefficients `b_J` for `J` in `I_N^d`, row-major from `(-N/2, ..)`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// `b_J` for a multi-index with entries in `[-N/2, N/2)`.
    pub fn coefficient(&self, j: &[i64]) -> f64 {
        let big_n = self.config.bandwidth as i64;
        let offset = j.iter().fold(0i64, |acc, &jt| acc * big_n + jt + big_n / 2);
        self.coefficients[offset as usize]
    }

    /// The trigonometric approximant `sum_J b_J cos(2 pi J t)` at a scaled
    /// difference vector `t`, by direct summation.
    pub fn approximant_at(&self, t: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut pos = 0;
        for_each_frequency(
            self.config.bandwidth,
            self.dim(),
            self.config.bandwidth,
            |k, _| {
                let phase: f64 = k.iter().zip(t).map(|(&kt, &x)| kt as f64 * x).sum();
                acc += self.coefficients[pos] * (2.0 * std::f64::consts::PI * phase).cos();
                pos += 1;
            },
        );
        acc
    }

    /// Approximates `K v` for the planned node set.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        let grid = self.transformed_grid(v);
        let mut out = vec![0.0; self.len()];
        self.footprints.gather(&grid, self.window.n, &mut out);
        Ok(out)
    }

    /// Approximates `K(targets, sources) v`. Targets are mapped with the
    /// sources' scaling and must stay inside the planned domain.
    pub fn apply_cross(&self, targets: &WindowPoints, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        if targets.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: targets.dim(),
            });
        }
        let outside = self.out_of_domain(targets);
        if !outside.is_empty() {
            let nodes = self.scaling.map_all(targets);
            let radius = outside
                .iter()
                .map(|&t| norm(&nodes[t * self.dim()..(t + 1) * self.dim()]))
                .fold(0.0, f64::max);
            return Err(Error::TargetOutOfDomain {
                count: outside.len(),
                radius,
                limit: self.domain_radius,
            });
        }
        let grid = self.transformed_grid(v);
        let footprints = Footprints::new(&self.scaling.map_all(targets), self.dim(), &self.window);
        let mut out = vec![0.0; targets.len()];
        footprints.gather(&grid, self.window.n, &mut out);
        Ok(out)
    }

    /// Indices of targets whose scaled position lies outside the domain.
    pub fn out_of_domain(&self, targets: &WindowPoints) -> Vec<usize> {
        let d = self.dim();
        let limit = self.domain_radius * (1.0 + 1e-12);
        let mut x = vec![0.0; d];
        (0..targets.len())
            .filter(|&t| {
                self.scaling.map_into(targets.point(t), &mut x);
                norm(&x) > limit
            })
            .collect()
    }

    /// Spread, forward FFT, coefficient multiply and inverse FFT: the grid a
    /// forward gather turns into kernel sums.
    fn transformed_grid(&self, v: &[f64]) -> Vec<Complex64> {
        let n_os = self.window.n;
        let d = self.dim();
        let mut grid = vec![Complex64::default(); n_os.pow(d as u32)];
        self.footprints.spread(v, &mut grid, n_os);
        fft_nd(&mut grid, n_os, d, &self.fft_forward);
        for (g, &w) in grid.iter_mut().zip(&self.multiplier) {
            *g *= w;
        }
        fft_nd(&mut grid, n_os, d, &self.fft_inverse);
        grid
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Trigonometric interpolation coefficients of the 1-periodized Gaussian
/// `exp(-|t|^2 / l^2)` sampled on the `N^d` grid `t = k/N`.
fn gaussian_coefficients(scaled_ell: f64, big_n: usize, d: usize) -> Vec<f64> {
    let images: Vec<i64> = if scaled_ell > 0.25 {
        vec![-2, -1, 0, 1, 2]
    } else {
        vec![-1, 0, 1]
    };
    let sample_1d: Vec<f64> = (0..big_n)
        .map(|k| {
            let t = k as f64 / big_n as f64;
            let t = if t >= 0.5 { t - 1.0 } else { t };
            images
                .iter()
                .map(|&r| (-((t + r as f64) / scaled_ell).powi(2)).exp())
                .sum()
        })
        .collect();
    // the periodized Gaussian is a product over dimensions, so is its DFT
    let (fwd, _) = plan_pair(big_n);
    let mut line: Vec<Complex64> = sample_1d.iter().map(|&s| Complex64::new(s, 0.0)).collect();
    fwd.process(&mut line);
    let coef_1d: Vec<f64> = line.iter().map(|c| c.re / big_n as f64).collect();

    let mut out = Vec::with_capacity(big_n.pow(d as u32));
    for_each_frequency(big_n, d, big_n, |k, _| {
        out.push(k.iter().map(|&kt| coef_1d[nfft::wrap(kt, big_n)]).product());
    });
    out
}

/// Fast ANOVA kernel operator: one fast summation plan per window, summed
/// with the window weights in window order.
#[derive(Debug, Clone)]
pub struct AnovaFastOperator {
    plans: Vec<FastsumPlan>,
    weights: Vec<f64>,
    n: usize,
}

/// Plans every window of `spec` over the rows of `points`.
pub fn anova_fast_operator(
    points: &DMatrix<f64>,
    spec: &AnovaKernel,
    config: &FastsumConfig,
) -> Result<AnovaFastOperator> {
    spec.windowing.validate(points.ncols())?;
    if let Some(w) = spec.windowing.windows.iter().find(|w| w.len() > 3) {
        return Err(Error::WindowTooLarge(w.len()));
    }
    let plans = spec
        .windowing
        .windows
        .par_iter()
        .enumerate()
        .map(|(l, window)| {
            FastsumPlan::new(
                &WindowPoints::from_matrix(points, window),
                spec.window_kernel(l),
                config,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnovaFastOperator {
        plans,
        weights: spec.windowing.weights.clone(),
        n: points.nrows(),
    })
}

impl AnovaFastOperator {
    pub fn plans(&self) -> &[FastsumPlan] {
        &self.plans
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl KernelOperator for AnovaFastOperator {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "operator size mismatch");
        let parts: Vec<Vec<f64>> = self
            .plans
            .par_iter()
            .map(|p| p.apply(v).expect("length checked"))
            .collect();
        let mut out = vec![0.0; self.n];
        for (part, &eta) in parts.iter().zip(&self.weights) {
            for (o, x) in out.iter_mut().zip(part) {
                *o += eta * x;
            }
        }
        out
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.plans
            .iter()
            .zip(&self.weights)
            .map(|(p, eta)| eta * p.entry(i, j))
            .sum()
    }
}

/// A single plan is the fast operator of its window's Gaussian kernel.
impl KernelOperator for FastsumPlan {
    fn size(&self) -> usize {
        self.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        FastsumPlan::apply(self, v).expect("operator size mismatch")
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel
            .eval(self.sources.point(i), self.sources.point(j))
    }
}

#[cfg(test)]
mod tests;
