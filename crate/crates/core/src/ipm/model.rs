use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureWindowing, Normalization};
use crate::error::{Error, Result};
use crate::fastsum::{FastsumConfig, FastsumPlan};
use crate::kernel::{cross_kernel_apply, AnovaKernel, KernelOperator, WindowPoints};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT: &str = "kis-svm-model";

/// Out-of-domain targets up to this count are evaluated directly instead of
/// re-planning the fast summation.
const DIRECT_FALLBACK_LIMIT: usize = 64;

/// Largest oversampled grid (in points) a widened prediction plan may use.
const MAX_REPLAN_GRID: usize = 1 << 22;

/// Kernel sum evaluation used by prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictBackend {
    Exact,
    #[default]
    Fast,
}

impl fmt::Display for PredictBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictBackend::Exact => "exact",
            PredictBackend::Fast => "fast",
        })
    }
}

impl FromStr for PredictBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(PredictBackend::Exact),
            "fast" => Ok(PredictBackend::Fast),
            _ => Err(Error::Config(format!(
                "unknown backend `{s}` (expected exact or fast)"
            ))),
        }
    }
}

/// Trained classifier `f(x) = sum_i alpha_i y_i k(x_i, x) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Multiplier of the equality constraint at the final iterate.
    pub lambda: f64,
    pub labels: Vec<f64>,
    /// Normalized training points, one per row.
    pub points: DMatrix<f64>,
    pub windowing: FeatureWindowing,
    pub normalization: Option<Normalization>,
    pub fastsum: FastsumConfig,
    pub c: f64,
    /// Support vectors are the `j` with `alpha_j > sv_threshold`.
    pub sv_threshold: f64,
    pub support: Vec<usize>,
}

/// Bias from the free support vectors
/// (`eps_sv < alpha_j < C - eps_sv`): the mean of `y_j - (K (alpha o y))_j`.
/// Without free support vectors the median over all support vectors is used,
/// and `0` when there are none.
pub fn compute_bias(op: &dyn KernelOperator, alpha: &[f64], y: &[f64], c: f64, eps_sv: f64) -> f64 {
    let k_y_alpha = op.apply(&super::hadamard(alpha, y));
    bias_from_products(alpha, y, &k_y_alpha, c, eps_sv)
}

pub(crate) fn bias_from_products(
    alpha: &[f64],
    y: &[f64],
    k_y_alpha: &[f64],
    c: f64,
    eps_sv: f64,
) -> f64 {
    let gap = |j: usize| y[j] - k_y_alpha[j];
    let free: Vec<f64> = (0..alpha.len())
        .filter(|&j| alpha[j] > eps_sv && alpha[j] < c - eps_sv)
        .map(gap)
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let mut bounded: Vec<f64> = (0..alpha.len())
        .filter(|&j| alpha[j] > eps_sv)
        .map(gap)
        .collect();
    if bounded.is_empty() {
        log::warn!("no support vectors; bias set to 0");
        return 0.0;
    }
    bounded.sort_by(f64::total_cmp);
    let m = bounded.len();
    if m % 2 == 1 {
        bounded[m / 2]
    } else {
        0.5 * (bounded[m / 2 - 1] + bounded[m / 2])
    }
}

impl TrainedModel {
    /// Assembles a model from a solved dual. `k_y_alpha` is
    /// `K (y o alpha)` over the training points.
    #[allow(clippy::too_many_arguments)]
    pub fn from_solution(
        points: DMatrix<f64>,
        labels: Vec<f64>,
        alpha: Vec<f64>,
        lambda: f64,
        k_y_alpha: &[f64],
        windowing: FeatureWindowing,
        normalization: Option<Normalization>,
        fastsum: FastsumConfig,
        c: f64,
    ) -> Result<Self> {
        let n = points.nrows();
        for len in [labels.len(), alpha.len(), k_y_alpha.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        windowing.validate(points.ncols())?;
        let sv_threshold = 1e-4 * c;
        let bias = bias_from_products(&alpha, &labels, k_y_alpha, c, sv_threshold);
        let support = (0..n).filter(|&j| alpha[j] > sv_threshold).collect();
        Ok(Self {
            alpha,
            bias,
            lambda,
            labels,
            points,
            windowing,
            normalization,
            fastsum,
            c,
            sv_threshold,
            support,
        })
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn kernel(&self) -> AnovaKernel {
        AnovaKernel {
            windowing: self.windowing.clone(),
        }
    }

    /// Applies the stored normalization (if any) to raw feature rows.
    pub fn normalize(&self, points: &mut DMatrix<f64>) -> Result<()> {
        self.check_dim(points)?;
        match &self.normalization {
            Some(n) => n.apply(points),
            None => Ok(()),
        }
    }

    fn check_dim(&self, points: &DMatrix<f64>) -> Result<()> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        Ok(())
    }

    /// `f(x)` for every row of `targets` (already normalized).
    pub fn decision_function(
        &self,
        targets: &DMatrix<f64>,
        backend: PredictBackend,
    ) -> Result<Vec<f64>> {
        self.check_dim(targets)?;
        let v = super::hadamard(&self.alpha, &self.labels);
        let sums = match backend {
            PredictBackend::Exact => cross_kernel_apply(&self.points, targets, &self.kernel(), &v)?,
            PredictBackend::Fast => self.fast_sums(targets, &v)?,
        };
        Ok(sums.into_iter().map(|s| s + self.bias).collect())
    }

    /// Predicted labels in `{-1, +1}`; `f(x) = 0` maps to `+1`.
    pub fn predict(&self, targets: &DMatrix<f64>, backend: PredictBackend) -> Result<Vec<f64>> {
        Ok(self
            .decision_function(targets, backend)?
            .into_iter()
            .map(|f| if f >= 0.0 { 1.0 } else { -1.0 })
            .collect())
    }

    fn fast_sums(&self, targets: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
        let spec = self.kernel();
        let mut total = vec![0.0; targets.nrows()];
        if targets.nrows() == 0 || self.is_empty() {
            return Ok(total);
        }
        for (l, window) in self.windowing.windows.iter().enumerate() {
            let kernel = spec.window_kernel(l);
            let sources = WindowPoints::from_matrix(&self.points, window);
            let tgt = WindowPoints::from_matrix(targets, window);
            let plan = FastsumPlan::new(&sources, kernel, &self.fastsum)?;
            let outside = plan.out_of_domain(&tgt);
            let sums = if outside.is_empty() {
                plan.apply_cross(&tgt, v)?
            } else if outside.len() <= DIRECT_FALLBACK_LIMIT {
                mixed_sums(&plan, &sources, &tgt, &outside, v)?
            } else {
                log::debug!(
                    "window {l}: {} targets outside the domain, re-planning",
                    outside.len()
                );
                match widened_plan(&plan, &sources, &tgt)? {
                    Some(wide) => wide.apply_cross(&tgt, v)?,
                    None => mixed_sums(&plan, &sources, &tgt, &outside, v)?,
                }
            };
            let w = self.windowing.weights[l];
            total.iter_mut().zip(sums).for_each(|(t, s)| *t += w * s);
        }
        Ok(total)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            c: self.c,
            bias: self.bias,
            lambda: self.lambda,
            sv_threshold: self.sv_threshold,
            windowing: self.windowing.clone(),
            normalization: self.normalization.clone(),
            fastsum: self.fastsum,
            support: self.support.clone(),
            alpha: self.alpha.clone(),
            labels: self.labels.clone(),
            points: self
                .points
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model fields are serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Model(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!(
                "unexpected format tag `{}`",
                file.format
            )));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let n = file.points.len();
        let d = file.points.first().map_or(0, Vec::len);
        if file.points.iter().any(|r| r.len() != d) {
            return Err(Error::Model("training points have ragged rows".into()));
        }
        if file.alpha.len() != n || file.labels.len() != n {
            return Err(Error::Model("coefficient and point counts differ".into()));
        }
        if file.support.iter().any(|&j| j >= n) {
            return Err(Error::Model("support index out of range".into()));
        }
        if let Some(norm) = &file.normalization {
            if norm.dim() != d || norm.std.len() != d {
                return Err(Error::Model(
                    "normalization does not match the feature count".into(),
                ));
            }
        }
        file.windowing
            .validate(d)
            .map_err(|e| Error::Model(format!("windowing: {e}")))?;
        let points = DMatrix::from_fn(n, d, |i, j| file.points[i][j]);
        Ok(Self {
            alpha: file.alpha,
            bias: file.bias,
            lambda: file.lambda,
            labels: file.labels,
            points,
            windowing: file.windowing,
            normalization: file.normalization,
            fastsum: file.fastsum,
            c: file.c,
            sv_threshold: file.sv_threshold,
            support: file.support,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Model(m) => Error::Model(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Fast sums for targets inside the plan's domain, direct sums for `outside`.
fn mixed_sums(
    plan: &FastsumPlan,
    sources: &WindowPoints,
    targets: &WindowPoints,
    outside: &[usize],
    v: &[f64],
) -> Result<Vec<f64>> {
    let mut inside_mask = vec![true; targets.len()];
    outside.iter().for_each(|&t| inside_mask[t] = false);
    let inside: Vec<usize> = (0..targets.len()).filter(|&t| inside_mask[t]).collect();
    let mut sums = vec![0.0; targets.len()];
    if !inside.is_empty() {
        for (&t, s) in inside
            .iter()
            .zip(plan.apply_cross(&subset_points(targets, &inside), v)?)
        {
            sums[t] = s;
        }
    }
    let kernel = plan.kernel();
    for &t in outside {
        let x = targets.point(t);
        sums[t] = (0..sources.len())
            .map(|i| v[i] * kernel.eval(sources.point(i), x))
            .sum();
    }
    Ok(sums)
}

/// A plan covering sources and targets whose bandwidth grows with the
/// domain, so the scaled length-scale times the bandwidth is preserved.
/// `None` when the grid would exceed [`MAX_REPLAN_GRID`] points.
fn widened_plan(
    plan: &FastsumPlan,
    sources: &WindowPoints,
    targets: &WindowPoints,
) -> Result<Option<FastsumPlan>> {
    let cfg = *plan.config();
    let kernel = plan.kernel();
    let wide = FastsumPlan::with_extent(sources, Some(targets), kernel, &cfg)?;
    let ratio = plan.scaled_length_scale() / wide.scaled_length_scale();
    if ratio <= 1.0 + 1e-9 {
        return Ok(Some(wide));
    }
    let bandwidth = ((cfg.bandwidth as f64 * ratio / 2.0).ceil() as usize * 2).max(cfg.bandwidth);
    let grid = (cfg.oversampling * bandwidth as f64).ceil() as usize;
    if grid
        .checked_pow(plan.dim() as u32)
        .is_none_or(|g| g > MAX_REPLAN_GRID)
    {
        return Ok(None);
    }
    let cfg = FastsumConfig { bandwidth, ..cfg };
    if cfg.validate().is_err() {
        return Ok(None);
    }
    FastsumPlan::with_extent(sources, Some(targets), kernel, &cfg).map(Some)
}

fn subset_points(points: &WindowPoints, indices: &[usize]) -> WindowPoints {
    let coords = indices
        .iter()
        .flat_map(|&i| points.point(i).iter().copied())
        .collect();
    WindowPoints::new(points.dim(), coords).expect("subset keeps the window dimension")
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    c: f64,
    bias: f64,
    lambda: f64,
    sv_threshold: f64,
    windowing: FeatureWindowing,
    normalization: Option<Normalization>,
    fastsum: FastsumConfig,
    support: Vec<usize>,
    alpha: Vec<f64>,
    labels: Vec<f64>,
    points: Vec<Vec<f64>>,
}
