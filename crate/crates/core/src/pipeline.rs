//! End-to-end training: kernel backend, preconditioner factor and interior
//! point solve, producing a [`TrainedModel`].

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{
    balance_and_split, build_windows, mutual_information_scores, zscore_fit_transform, Dataset,
    FeatureWindowing,
};
use crate::error::{Error, Result};
use crate::fastsum::{anova_fast_operator, FastsumConfig, FastsumPlan};
use crate::ipm::{ipm_solve, IpmConfig, IpmOutcome, IpmStatus, TrainedModel};
use crate::kernel::{exact_operator, AnovaKernel, GaussianKernel, KernelOperator, WindowPoints};
use crate::lowrank::{
    nystrom, pivoted_cholesky_greedy, pivoted_cholesky_random, random_fourier_features,
    stack_anova_factors, FactorMethod, LowRankFactor, NystromMode, StackedFactor,
    DEFAULT_LDL_THRESHOLD,
};
use crate::saddle::Preconditioner;

/// Preprocessing settings of [`prepare`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrepareOptions {
    pub train_fraction: f64,
    pub seed: u64,
    /// Features per window when windows are built from scores.
    pub window_size: usize,
    pub mi_bins: usize,
    /// Explicit 0-based windows; `None` ranks features by mutual information.
    pub windows: Option<Vec<Vec<usize>>>,
    /// Fraction of the held-out rows set aside as a validation split.
    pub holdout: Option<f64>,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.5,
            seed: 0,
            window_size: 3,
            mi_bins: 10,
            windows: None,
            holdout: None,
        }
    }
}

/// Normalized splits and the feature windows built on the training split.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    /// Present when a holdout fraction was requested.
    pub validation: Option<Dataset>,
    pub windowing: FeatureWindowing,
    /// Training rows dropped by class balancing.
    pub discarded: usize,
}

/// Balanced split, z-score normalization fitted on the training split and
/// window construction.
pub fn prepare(data: &Dataset, opts: &PrepareOptions) -> Result<PreparedData> {
    let split = balance_and_split(data, opts.train_fraction, opts.seed)?;
    let (test_raw, validation_raw) = match opts.holdout {
        None => (split.test, None),
        Some(f) if !(f > 0.0 && f < 1.0) => {
            return Err(Error::Config(format!(
                "holdout fraction {f} must lie strictly between 0 and 1"
            )));
        }
        Some(f) => {
            let mut idx: Vec<usize> = (0..split.test.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1)));
            let k = (f * idx.len() as f64).round() as usize;
            if k == 0 || k == idx.len() {
                return Err(Error::Data(
                    "holdout leaves an empty validation or test split".into(),
                ));
            }
            (
                split.test.subset(&idx[k..]),
                Some(split.test.subset(&idx[..k])),
            )
        }
    };
    let (train, test) = zscore_fit_transform(&split.train, &test_raw)?;
    let validation = match validation_raw {
        Some(v) => Some(zscore_fit_transform(&split.train, &v)?.1),
        None => None,
    };
    let windowing = match &opts.windows {
        Some(w) => FeatureWindowing::new(w.clone(), train.dim())?,
        None => {
            let scores = mutual_information_scores(&train, opts.mi_bins)?;
            build_windows(&scores, train.dim(), opts.window_size)?
        }
    };
    Ok(PreparedData {
        train,
        test,
        validation,
        windowing,
        discarded: split.discarded,
    })
}

/// How kernel products are evaluated during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Materialized dense kernel matrix.
    Exact,
    /// Fast summation with the given configuration.
    Fast(FastsumConfig),
}

/// Low-rank preconditioner settings. `method = None` disables
/// preconditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecondConfig {
    pub method: Option<FactorMethod>,
    /// Total rank, split evenly over the windows.
    pub rank: usize,
    /// Explicit per-window ranks, overriding `rank`.
    pub window_ranks: Option<Vec<usize>>,
    pub err_tol: f64,
    pub ldl_threshold: f64,
    pub seed: u64,
}

impl Default for PrecondConfig {
    fn default() -> Self {
        Self {
            method: Some(FactorMethod::CholeskyGreedy),
            rank: 200,
            window_ranks: None,
            err_tol: 1e-5,
            ldl_threshold: DEFAULT_LDL_THRESHOLD,
            seed: 0,
        }
    }
}

impl PrecondConfig {
    /// Rank of each of `windows` factors: `max(1, rank / windows)` unless
    /// given explicitly.
    pub fn ranks(&self, windows: usize) -> Result<Vec<usize>> {
        match &self.window_ranks {
            Some(r) if r.len() != windows => Err(Error::DimensionMismatch {
                expected: windows,
                got: r.len(),
            }),
            Some(r) if r.contains(&0) => Err(Error::Config("window ranks must be positive".into())),
            Some(r) => Ok(r.clone()),
            None if self.rank == 0 => Err(Error::Config("rank must be at least 1".into())),
            None => Ok(vec![(self.rank / windows.max(1)).max(1); windows]),
        }
    }
}

/// Everything [`fit`] needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSetup {
    pub backend: Backend,
    pub precond: PrecondConfig,
    pub ipm: IpmConfig,
    /// Fast summation settings stored in the model for prediction.
    pub fastsum: FastsumConfig,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        let fastsum = FastsumConfig::default();
        Self {
            backend: Backend::Fast(fastsum),
            precond: PrecondConfig::default(),
            ipm: IpmConfig::default(),
            fastsum,
        }
    }
}

/// Diagnostics of one training run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub n_train: usize,
    pub dim: usize,
    pub windows: usize,
    /// Rank of the stacked preconditioner factor (0 without one).
    pub rank: usize,
    pub setup_seconds: f64,
    pub fit_seconds: f64,
    pub outcome: IpmOutcome,
}

impl FitReport {
    pub fn status(&self) -> IpmStatus {
        self.outcome.status
    }

    pub fn mean_gmres_iterations(&self) -> f64 {
        self.outcome.mean_gmres_iterations()
    }
}

/// The training kernel operator over the rows of `points`.
pub fn build_operator(
    points: &DMatrix<f64>,
    spec: &AnovaKernel,
    backend: Backend,
) -> Result<Box<dyn KernelOperator>> {
    Ok(match backend {
        Backend::Exact => Box::new(exact_operator(points, spec)?),
        Backend::Fast(cfg) => Box::new(anova_fast_operator(points, spec, &cfg)?),
    })
}

/// Single-window Gaussian kernel evaluated on demand; `apply` costs
/// `O(n^2)` kernel evaluations and nothing is stored.
pub struct DirectGaussianOperator {
    points: WindowPoints,
    kernel: GaussianKernel,
}

impl DirectGaussianOperator {
    pub fn new(points: WindowPoints, kernel: GaussianKernel) -> Self {
        Self { points, kernel }
    }
}

impl KernelOperator for DirectGaussianOperator {
    fn size(&self) -> usize {
        self.points.len()
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size(), "operator size mismatch");
        (0..self.size())
            .into_par_iter()
            .map(|i| {
                let xi = self.points.point(i);
                (0..self.size())
                    .map(|j| v[j] * self.kernel.eval(xi, self.points.point(j)))
                    .sum()
            })
            .collect()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel.eval(self.points.point(i), self.points.point(j))
    }

    fn diagonal(&self) -> Vec<f64> {
        vec![1.0; self.size()]
    }
}

/// Per-window factors of `method`, stacked with the window weights.
pub fn build_factor(
    points: &DMatrix<f64>,
    spec: &AnovaKernel,
    backend: Backend,
    cfg: &PrecondConfig,
) -> Result<StackedFactor> {
    let n = points.nrows();
    let Some(method) = cfg.method else {
        return Ok(StackedFactor::empty(n));
    };
    let windowing = &spec.windowing;
    let ranks = cfg.ranks(windowing.len())?;
    let factors: Vec<LowRankFactor> = (0..windowing.len())
        .into_par_iter()
        .map(|l| {
            let wp = WindowPoints::from_matrix(points, &windowing.windows[l]);
            let kernel = spec.window_kernel(l);
            let rank = ranks[l];
            let seed = cfg.seed.wrapping_add(l as u64);
            if method == FactorMethod::Rff {
                return random_fourier_features(&wp, kernel, rank, seed);
            }
            let rank = rank.min(n);
            let op: Box<dyn KernelOperator> = match backend {
                Backend::Exact => Box::new(DirectGaussianOperator::new(wp, kernel)),
                Backend::Fast(fc) => Box::new(FastsumPlan::new(&wp, kernel, &fc)?),
            };
            match method {
                FactorMethod::CholeskyGreedy => {
                    pivoted_cholesky_greedy(op.as_ref(), rank, cfg.err_tol)
                }
                FactorMethod::CholeskyRandom => pivoted_cholesky_random(op.as_ref(), rank, seed),
                FactorMethod::NystromColumns => nystrom(
                    op.as_ref(),
                    rank,
                    NystromMode::Columns,
                    seed,
                    cfg.ldl_threshold,
                ),
                FactorMethod::NystromGaussian => nystrom(
                    op.as_ref(),
                    rank,
                    NystromMode::Gaussian,
                    seed,
                    cfg.ldl_threshold,
                ),
                FactorMethod::Rff => unreachable!(),
            }
        })
        .collect::<Result<_>>()?;
    for (l, f) in factors.iter().enumerate() {
        if f.achieved_rank() < f.requested_rank.min(n) {
            log::info!(
                "window {l}: {} stopped at rank {} of {}",
                f.method,
                f.achieved_rank(),
                f.requested_rank
            );
        }
    }
    stack_anova_factors(&factors, &windowing.weights)
}

/// Trains on `train` (balanced, normalized) with the given windows.
pub fn fit(
    train: &Dataset,
    windowing: &FeatureWindowing,
    setup: &TrainingSetup,
) -> Result<(TrainedModel, FitReport)> {
    setup.ipm.validate()?;
    let (pos, neg) = train.class_counts();
    if pos == 0 || neg == 0 {
        return Err(Error::Data(
            "training data must contain both classes".into(),
        ));
    }
    let spec = AnovaKernel::new(windowing.clone(), train.dim())?;
    let op = build_operator(&train.points, &spec, setup.backend)?;

    let start = Instant::now();
    let factor = build_factor(&train.points, &spec, setup.backend, &setup.precond)?;
    let mut precond = match setup.precond.method {
        None => Preconditioner::identity(&train.labels),
        Some(_) => Preconditioner::low_rank(&factor, &train.labels)?,
    };
    let setup_seconds = start.elapsed().as_secs_f64();

    let outcome = ipm_solve(op.as_ref(), &train.labels, &mut precond, &setup.ipm)?;
    let fit_seconds = start.elapsed().as_secs_f64();

    let model = TrainedModel::from_solution(
        train.points.clone(),
        train.labels.clone(),
        outcome.state.alpha.clone(),
        outcome.state.lambda,
        &outcome.k_y_alpha,
        windowing.clone(),
        train.normalization.clone(),
        setup.fastsum,
        setup.ipm.c,
    )?;
    let report = FitReport {
        n_train: train.len(),
        dim: train.dim(),
        windows: windowing.len(),
        rank: factor.rank(),
        setup_seconds,
        fit_seconds,
        outcome,
    };
    Ok((model, report))
}
