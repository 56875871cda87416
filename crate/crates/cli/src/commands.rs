//! Subcommand implementations.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use kis_core::data::{read_csv_table, read_libsvm_table, Dataset, LabelColumn, RawTable};
use kis_core::ipm::{IpmStatus, PredictBackend, TrainedModel};
use kis_core::lowrank::FactorMethod;
use kis_core::pipeline::{fit, prepare, FitReport, PrecondConfig, TrainingSetup};
use kis_core::synthetic::{generate, SyntheticKind};
use kis_core::tuning::{accuracy, random_search, write_trial_log, SearchSpace};
use kis_core::{Error, Result};

use crate::args::{infer_format, BackendArg, DataArgs, Format, SolverArgs};

/// Header of the training metrics CSV.
pub const METRICS_HEADER: [&str; 10] = [
    "n_train",
    "d",
    "P",
    "rank",
    "fit_s",
    "ipm_iters",
    "mean_gmres",
    "xi_alpha",
    "xi_lambda",
    "mu_final",
];

/// Header of the preconditioner benchmark CSV.
pub const BENCHMARK_HEADER: [&str; 8] = [
    "method",
    "rank",
    "achieved_rank",
    "n_train",
    "setup_s",
    "mean_gmres",
    "ipm_iters",
    "status",
];

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,

    /// Metrics CSV to write; printed to stdout when absent.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file written by `train` or `tune`.
    #[arg(long)]
    pub model: PathBuf,

    /// Input file (LIBSVM text or CSV), labeled or not.
    #[arg(long)]
    pub data: PathBuf,

    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// CSV label column: 0-based index, header name, `last` or `none`.
    /// By default a column beyond the model's features is taken as labels.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,

    /// Kernel sums for prediction.
    #[arg(long, value_enum, default_value = "fast")]
    pub backend: BackendArg,

    /// File receiving one predicted label per line.
    #[arg(long, default_value = "predictions.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long, default_value_t = 25)]
    pub trials: usize,

    #[arg(long = "ell-min", default_value_t = 0.1)]
    pub ell_min: f64,

    #[arg(long = "ell-max", default_value_t = 10.0)]
    pub ell_max: f64,

    #[arg(long = "C-min", default_value_t = 0.1)]
    pub c_min: f64,

    #[arg(long = "C-max", default_value_t = 0.7)]
    pub c_max: f64,

    /// Sample one length-scale for all windows.
    #[arg(long = "shared-lengthscale")]
    pub shared_lengthscale: bool,

    /// Do not run the fixed baseline `(ell = 1, C = 0.4)` as trial 0.
    #[arg(long = "no-baseline")]
    pub no_baseline: bool,

    /// Score trials on this fraction of the held-out rows and keep the
    /// rest as an untouched test split.
    #[arg(long)]
    pub holdout: Option<f64>,

    /// Best model file to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,

    /// Trial log CSV; printed to stdout when absent.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Factor methods to compare.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "cholesky-greedy,cholesky-random,nystrom-columns,nystrom-gaussian,rff"
    )]
    pub methods: Vec<FactorMethod>,

    /// Total preconditioner ranks.
    #[arg(long, value_delimiter = ',', default_value = "50,200,1000")]
    pub ranks: Vec<usize>,

    /// Training subset sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub sizes: Vec<usize>,

    /// Result CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// `blobs`, `circles` or `anova`.
    #[arg(long)]
    pub kind: SyntheticKind,

    /// Number of points (even).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    /// Feature count of the `anova` problem.
    #[arg(long, default_value_t = 6)]
    pub d: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output file; CSV when the extension is `.csv`, LIBSVM otherwise.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_error(path: Option<&Path>, e: impl std::fmt::Display) -> Error {
    let target = path.map_or("stdout".to_string(), |p| p.display().to_string());
    Error::Data(format!("writing {target}: {e}"))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn metrics_row(report: &FitReport) -> Vec<String> {
    let out = &report.outcome;
    vec![
        report.n_train.to_string(),
        report.dim.to_string(),
        report.windows.to_string(),
        report.rank.to_string(),
        report.fit_seconds.to_string(),
        out.iterations().to_string(),
        report.mean_gmres_iterations().to_string(),
        out.rel_xi_alpha().to_string(),
        out.rel_xi_lambda().to_string(),
        out.state.mu.to_string(),
    ]
}

fn predict_backend(b: BackendArg) -> PredictBackend {
    match b {
        BackendArg::Fast => PredictBackend::Fast,
        BackendArg::Exact => PredictBackend::Exact,
    }
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let setup = args.solver.setup()?;
    let data = args.data.load()?;
    let prepared = prepare(&data, &args.solver.prepare_options(None)?)?;
    let windowing = prepared
        .windowing
        .clone()
        .with_length_scales(args.solver.length_scales(prepared.windowing.len())?)?;
    log::info!(
        "training on {} points ({} discarded by balancing), {} windows",
        prepared.train.len(),
        prepared.discarded,
        windowing.len()
    );

    let (model, report) = fit(&prepared.train, &windowing, &setup)?;

    let path = args.metrics.as_deref();
    let mut w = csv_writer(output(path)?);
    w.write_record(METRICS_HEADER)
        .map_err(|e| write_error(path, e))?;
    w.write_record(metrics_row(&report))
        .map_err(|e| write_error(path, e))?;
    w.flush().map_err(|e| write_error(path, e))?;

    if report.status() == IpmStatus::Stalled {
        return Err(Error::Stalled {
            iterations: report.outcome.iterations(),
        });
    }
    model.save(&args.out)?;

    let test_acc = accuracy(
        &model.predict(&prepared.test.points, predict_backend(args.solver.backend))?,
        &prepared.test.labels,
    )?;
    eprintln!(
        "{} after {} IPM iterations in {:.3} s; test accuracy {test_acc:.4}; model written to {}",
        report.status(),
        report.outcome.iterations(),
        report.fit_seconds,
        args.out.display()
    );
    Ok(())
}

/// Reads prediction input; labels are optional.
fn read_targets(args: &PredictArgs, dim: usize) -> Result<RawTable> {
    let format = args.format.unwrap_or_else(|| infer_format(&args.data));
    match format {
        Format::Libsvm => read_libsvm_table(&args.data, Some(dim)),
        Format::Csv => {
            if let Some(col) = &args.label_col {
                let col: LabelColumn = col.parse().expect("label column parsing is infallible");
                return read_csv_table(&args.data, &col);
            }
            let table = read_csv_table(&args.data, &LabelColumn::None)?;
            if table.points.ncols() == dim + 1 {
                read_csv_table(&args.data, &LabelColumn::Last)
            } else {
                Ok(table)
            }
        }
    }
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let mut table = read_targets(args, model.dim())?;
    model.normalize(&mut table.points)?;

    let start = Instant::now();
    let predictions = model.predict(&table.points, predict_backend(args.backend))?;
    let seconds = start.elapsed().as_secs_f64();

    let path = Some(args.out.as_path());
    let mut w = create(&args.out)?;
    for p in &predictions {
        writeln!(w, "{p}").map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))?;

    if let Some(labels) = &table.labels {
        println!("accuracy: {}", accuracy(&predictions, labels)?);
    }
    println!("predicted: {}", predictions.len());
    println!("predict_seconds: {seconds}");
    Ok(())
}

pub fn tune(args: &TuneArgs) -> Result<()> {
    let setup = args.solver.setup()?;
    let space = SearchSpace {
        ell_min: args.ell_min,
        ell_max: args.ell_max,
        c_min: args.c_min,
        c_max: args.c_max,
        trials: args.trials,
        seed: args.solver.seed,
        shared_length_scale: args.shared_lengthscale,
        include_baseline: !args.no_baseline,
    };
    space.validate()?;
    let data = args.data.load()?;
    let prepared = prepare(&data, &args.solver.prepare_options(args.holdout)?)?;
    let validation = prepared.validation.as_ref().unwrap_or(&prepared.test);

    let log_path = args.log.as_deref();
    let write_log = |log: &[kis_core::tuning::TrialRecord]| -> Result<()> {
        write_trial_log(log, output(log_path)?)
    };
    let result = match random_search(
        &prepared.train,
        validation,
        &prepared.windowing,
        &space,
        &setup,
    ) {
        Ok(r) => r,
        Err(Error::AllTrialsStalled { trials, log }) => {
            write_log(&log)?;
            return Err(Error::AllTrialsStalled { trials, log });
        }
        Err(e) => return Err(e),
    };
    write_log(&result.log)?;
    result.model.save(&args.out)?;

    let best = result.best_record();
    let mut summary = format!(
        "best trial {} (C = {}, length-scales {:?}): validation accuracy {}",
        best.trial,
        best.c,
        best.length_scales,
        best.accuracy.unwrap_or(f64::NAN)
    );
    if prepared.validation.is_some() {
        let test_acc = accuracy(
            &result
                .model
                .predict(&prepared.test.points, predict_backend(args.solver.backend))?,
            &prepared.test.labels,
        )?;
        summary += &format!(", test accuracy {test_acc}");
    }
    eprintln!("{summary}; model written to {}", args.out.display());
    Ok(())
}

/// Status column of a benchmark row.
fn bench_status(report: &FitReport, requested: usize) -> String {
    if report.rank < requested {
        format!("{} (rank {} of {requested})", report.status(), report.rank)
    } else {
        report.status().to_string()
    }
}

pub fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let base = args.solver.setup()?;
    let data = args.data.load()?;
    let prepared = prepare(&data, &args.solver.prepare_options(None)?)?;
    let windowing = prepared
        .windowing
        .clone()
        .with_length_scales(args.solver.length_scales(prepared.windowing.len())?)?;
    let p = windowing.len();

    let path = args.out.as_deref();
    let mut w = csv_writer(output(path)?);
    w.write_record(BENCHMARK_HEADER)
        .map_err(|e| write_error(path, e))?;
    for &size in &args.sizes {
        if size > prepared.train.len() {
            return Err(Error::Data(format!(
                "subset size {size} exceeds the {} available training points",
                prepared.train.len()
            )));
        }
        let subset: Dataset = prepared.train.subset(&(0..size).collect::<Vec<_>>());
        for &method in &args.methods {
            for &rank in &args.ranks {
                let setup = TrainingSetup {
                    precond: PrecondConfig {
                        method: Some(method),
                        rank,
                        window_ranks: None,
                        ..base.precond.clone()
                    },
                    ..base.clone()
                };
                let requested: usize = setup.precond.ranks(p)?.iter().map(|&r| r.min(size)).sum();
                let row = match fit(&subset, &windowing, &setup) {
                    Ok((_, report)) => vec![
                        method.to_string(),
                        rank.to_string(),
                        report.rank.to_string(),
                        size.to_string(),
                        report.setup_seconds.to_string(),
                        report.mean_gmres_iterations().to_string(),
                        report.outcome.iterations().to_string(),
                        bench_status(&report, requested),
                    ],
                    Err(e) => {
                        log::warn!("{method} at rank {rank}, n = {size}: {e}");
                        vec![
                            method.to_string(),
                            rank.to_string(),
                            String::new(),
                            size.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            format!("failed: {e}"),
                        ]
                    }
                };
                w.write_record(&row).map_err(|e| write_error(path, e))?;
                w.flush().map_err(|e| write_error(path, e))?;
            }
        }
    }
    Ok(())
}

pub fn gen_synthetic(args: &GenArgs) -> Result<()> {
    let data = generate(args.kind, args.n, args.d, args.seed)?;
    let path = Some(args.out.as_path());
    let mut w = create(&args.out)?;
    let format = args.format.unwrap_or_else(|| infer_format(&args.out));
    let d = data.dim();
    match format {
        Format::Csv => {
            let mut cw = csv_writer(&mut w);
            let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
            header.push("label".into());
            cw.write_record(&header).map_err(|e| write_error(path, e))?;
            for i in 0..data.len() {
                let mut row: Vec<String> = data.row(i).iter().map(f64::to_string).collect();
                row.push(data.labels[i].to_string());
                cw.write_record(&row).map_err(|e| write_error(path, e))?;
            }
            cw.flush().map_err(|e| write_error(path, e))?;
        }
        Format::Libsvm => {
            for i in 0..data.len() {
                let features: Vec<String> = data
                    .row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, v)| format!("{}:{v}", j + 1))
                    .collect();
                writeln!(w, "{} {}", data.labels[i], features.join(" "))
                    .map_err(|e| write_error(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| write_error(path, e))?;
    Ok(())
}
