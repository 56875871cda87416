//! Command-line arguments shared by several subcommands and their mapping
//! onto library configuration.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kis_core::data::{load_csv, load_libsvm, Dataset, LabelColumn};
use kis_core::fastsum::FastsumConfig;
use kis_core::ipm::IpmConfig;
use kis_core::lowrank::FactorMethod;
use kis_core::pipeline::{Backend, PrecondConfig, PrepareOptions, TrainingSetup};
use kis_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecondArg {
    CholeskyGreedy,
    CholeskyRandom,
    NystromColumns,
    NystromGaussian,
    Rff,
    None,
}

impl PrecondArg {
    pub fn method(self) -> Option<FactorMethod> {
        match self {
            PrecondArg::CholeskyGreedy => Some(FactorMethod::CholeskyGreedy),
            PrecondArg::CholeskyRandom => Some(FactorMethod::CholeskyRandom),
            PrecondArg::NystromColumns => Some(FactorMethod::NystromColumns),
            PrecondArg::NystromGaussian => Some(FactorMethod::NystromGaussian),
            PrecondArg::Rff => Some(FactorMethod::Rff),
            PrecondArg::None => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Fast,
    Exact,
}

/// Where the data comes from.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input file (LIBSVM text or CSV).
    #[arg(long)]
    pub data: PathBuf,

    /// Input format; inferred from the file extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// CSV label column: 0-based index, header name, `last` or `none`.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,

    /// Feature count for LIBSVM input (default: largest index seen).
    #[arg(long)]
    pub dim: Option<usize>,
}

impl DataArgs {
    pub fn format(&self) -> Format {
        self.format.unwrap_or_else(|| infer_format(&self.data))
    }

    pub fn label_column(&self) -> LabelColumn {
        self.label_col.as_deref().map_or(LabelColumn::Last, |s| {
            s.parse().expect("label column parsing is infallible")
        })
    }

    /// Loads a labeled dataset.
    pub fn load(&self) -> Result<Dataset> {
        match self.format() {
            Format::Libsvm => load_libsvm(&self.data, self.dim),
            Format::Csv => load_csv(&self.data, &self.label_column()),
        }
    }
}

pub fn infer_format(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Libsvm,
    }
}

/// Splitting, windowing, preconditioner, fast summation and solver flags.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Preconditioner factor.
    #[arg(long, value_enum, default_value = "cholesky-greedy")]
    pub precond: PrecondArg,

    /// Total preconditioner rank, split evenly over the windows.
    #[arg(long, default_value_t = 200)]
    pub rank: usize,

    /// Explicit per-window ranks, comma separated.
    #[arg(long = "window-ranks", value_delimiter = ',')]
    pub window_ranks: Option<Vec<usize>>,

    /// Early-stop tolerance of greedy pivoted Cholesky.
    #[arg(long = "err-tol", default_value_t = 1e-5)]
    pub err_tol: f64,

    /// Kernel products during training.
    #[arg(long, value_enum, default_value = "fast")]
    pub backend: BackendArg,

    /// Fast summation bandwidth N.
    #[arg(long, default_value_t = 32)]
    pub bandwidth: usize,

    /// Fast summation window cutoff m.
    #[arg(long, default_value_t = 4)]
    pub cutoff: usize,

    /// Fast summation grid oversampling factor.
    #[arg(long, default_value_t = 2.0)]
    pub oversampling: f64,

    /// Box bound C.
    #[arg(long = "C", default_value_t = 0.4)]
    pub c: f64,

    /// Barrier reduction factor.
    #[arg(long, default_value_t = 0.6)]
    pub sigma: f64,

    /// Fraction-to-boundary factor.
    #[arg(long, default_value_t = 0.99995)]
    pub gamma0: f64,

    #[arg(long = "tol-ip", default_value_t = 0.1)]
    pub tol_ip: f64,

    #[arg(long = "tol-gmres", default_value_t = 1e-3)]
    pub tol_gmres: f64,

    #[arg(long = "max-ip", default_value_t = 50)]
    pub max_ip: usize,

    #[arg(long = "max-gmres", default_value_t = 100)]
    pub max_gmres: usize,

    /// `auto` (mutual-information ranking) or 1-based windows such as `1,2,3;4,5`.
    #[arg(long, default_value = "auto")]
    pub windows: String,

    /// Features per window for `--windows auto`.
    #[arg(long = "window-size", default_value_t = 3)]
    pub window_size: usize,

    /// Kernel length-scale: one value for all windows or one per window.
    #[arg(long = "length-scale", value_delimiter = ',', default_value = "1")]
    pub length_scale: Vec<f64>,

    /// Fraction of the data used for training.
    #[arg(long = "train-fraction", default_value_t = 0.5)]
    pub train_fraction: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    pub fn fastsum(&self) -> FastsumConfig {
        FastsumConfig {
            bandwidth: self.bandwidth,
            cutoff: self.cutoff,
            oversampling: self.oversampling,
            ..FastsumConfig::default()
        }
    }

    pub fn setup(&self) -> Result<TrainingSetup> {
        let fastsum = self.fastsum();
        fastsum.validate()?;
        let ipm = IpmConfig {
            c: self.c,
            sigma: self.sigma,
            gamma0: self.gamma0,
            tol_ip: self.tol_ip,
            max_ip: self.max_ip,
            tol_gmres: self.tol_gmres,
            max_gmres: self.max_gmres,
            seed: self.seed,
            ..IpmConfig::default()
        };
        ipm.validate()?;
        Ok(TrainingSetup {
            backend: match self.backend {
                BackendArg::Fast => Backend::Fast(fastsum),
                BackendArg::Exact => Backend::Exact,
            },
            precond: PrecondConfig {
                method: self.precond.method(),
                rank: self.rank,
                window_ranks: self.window_ranks.clone(),
                err_tol: self.err_tol,
                seed: self.seed,
                ..PrecondConfig::default()
            },
            ipm,
            fastsum,
        })
    }

    pub fn prepare_options(&self, holdout: Option<f64>) -> Result<PrepareOptions> {
        Ok(PrepareOptions {
            train_fraction: self.train_fraction,
            seed: self.seed,
            window_size: self.window_size,
            windows: parse_windows(&self.windows)?,
            holdout,
            ..PrepareOptions::default()
        })
    }

    /// Length-scales for `p` windows.
    pub fn length_scales(&self, p: usize) -> Result<Vec<f64>> {
        match self.length_scale.as_slice() {
            [l] => Ok(vec![*l; p]),
            ls if ls.len() == p => Ok(ls.to_vec()),
            ls => Err(Error::Config(format!(
                "{} length-scales given for {p} windows",
                ls.len()
            ))),
        }
    }
}

/// `auto` or `;`-separated groups of 1-based, `,`-separated feature indices.
pub fn parse_windows(spec: &str) -> Result<Option<Vec<Vec<usize>>>> {
    if spec.trim() == "auto" {
        return Ok(None);
    }
    let windows = spec
        .split(';')
        .map(|group| {
            group
                .split(',')
                .map(|t| match t.trim().parse::<usize>() {
                    Ok(j) if j >= 1 => Ok(j - 1),
                    _ => Err(Error::Config(format!(
                        "invalid feature index `{}` in --windows",
                        t.trim()
                    ))),
                })
                .collect::<Result<Vec<usize>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(windows))
}
