//! Random search over per-window length-scales and the box bound `C`.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureWindowing};
use crate::error::{Error, Result};
use crate::ipm::{IpmConfig, IpmStatus, PredictBackend, TrainedModel};
use crate::pipeline::{fit, Backend, TrainingSetup};

/// Length-scale used by the baseline trial.
pub const BASELINE_LENGTH_SCALE: f64 = 1.0;
/// Box bound used by the baseline trial.
pub const BASELINE_C: f64 = 0.4;

/// Sampling ranges of the random search. Length-scales are drawn
/// log-uniformly, `C` uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub ell_min: f64,
    pub ell_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub trials: usize,
    pub seed: u64,
    /// Draw one length-scale for all windows instead of one per window.
    pub shared_length_scale: bool,
    /// Make trial 0 the fixed baseline `(ell = 1, C = 0.4)`.
    pub include_baseline: bool,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            ell_min: 0.1,
            ell_max: 10.0,
            c_min: 0.1,
            c_max: 0.7,
            trials: 25,
            seed: 0,
            shared_length_scale: false,
            include_baseline: true,
        }
    }
}

/// Parameters of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialParams {
    pub length_scales: Vec<f64>,
    pub c: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if !(self.ell_min > 0.0 && self.ell_min <= self.ell_max && self.ell_max.is_finite()) {
            return Err(Error::Config(format!(
                "length-scale range [{}, {}] must be positive and ordered",
                self.ell_min, self.ell_max
            )));
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max && self.c_max.is_finite()) {
            return Err(Error::Config(format!(
                "C range [{}, {}] must be positive and ordered",
                self.c_min, self.c_max
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial is required".into()));
        }
        Ok(())
    }

    /// The full parameter sequence for `windows` windows; depends only on
    /// the space and its seed.
    pub fn sample(&self, windows: usize) -> Result<Vec<TrialParams>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = (self.ell_min.ln(), self.ell_max.ln());
        let draw_ell = |rng: &mut ChaCha8Rng| {
            if lo == hi {
                self.ell_min
            } else {
                rng.random_range(lo..hi).exp()
            }
        };
        Ok((0..self.trials)
            .map(|t| {
                if t == 0 && self.include_baseline {
                    return TrialParams {
                        length_scales: vec![BASELINE_LENGTH_SCALE; windows],
                        c: BASELINE_C,
                    };
                }
                let length_scales = if self.shared_length_scale {
                    vec![draw_ell(&mut rng); windows]
                } else {
                    (0..windows).map(|_| draw_ell(&mut rng)).collect()
                };
                let c = if self.c_min == self.c_max {
                    self.c_min
                } else {
                    rng.random_range(self.c_min..self.c_max)
                };
                TrialParams { length_scales, c }
            })
            .collect())
    }
}

/// One row of the trial log. Stalled trials carry no accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub length_scales: Vec<f64>,
    pub c: f64,
    pub accuracy: Option<f64>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
    pub mean_gmres_iters: f64,
    pub ipm_iters: usize,
    pub status: IpmStatus,
}

/// Outcome of [`random_search`].
#[derive(Debug, Clone)]
pub struct TuningResult {
    /// Index of the winning trial in `log`.
    pub best: usize,
    pub windowing: FeatureWindowing,
    pub c: f64,
    pub model: TrainedModel,
    pub log: Vec<TrialRecord>,
}

impl TuningResult {
    pub fn best_record(&self) -> &TrialRecord {
        &self.log[self.best]
    }
}

/// Fraction of entries whose sign agrees with the label; `0` counts as
/// positive.
pub fn accuracy(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Data("accuracy of an empty set is undefined".into()));
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| (**p >= 0.0) == (**y >= 0.0))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Trains one model per sampled parameter set on `train` and scores it on
/// `validation` (both normalized). The most accurate non-stalled trial
/// wins; ties go to the earlier trial.
pub fn random_search(
    train: &Dataset,
    validation: &Dataset,
    windowing: &FeatureWindowing,
    space: &SearchSpace,
    setup: &TrainingSetup,
) -> Result<TuningResult> {
    if validation.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: validation.dim(),
        });
    }
    let params = space.sample(windowing.len())?;
    let predict_backend = match setup.backend {
        Backend::Exact => PredictBackend::Exact,
        Backend::Fast(_) => PredictBackend::Fast,
    };

    let mut log = Vec::with_capacity(params.len());
    let mut best: Option<(usize, f64, FeatureWindowing, TrainedModel)> = None;
    for (trial, p) in params.into_iter().enumerate() {
        let trial_windows = windowing
            .clone()
            .with_length_scales(p.length_scales.clone())?;
        let trial_setup = TrainingSetup {
            ipm: IpmConfig {
                c: p.c,
                ..setup.ipm
            },
            ..setup.clone()
        };
        let mut record = TrialRecord {
            trial,
            length_scales: p.length_scales,
            c: p.c,
            accuracy: None,
            fit_seconds: 0.0,
            predict_seconds: 0.0,
            mean_gmres_iters: 0.0,
            ipm_iters: 0,
            status: IpmStatus::Stalled,
        };
        match fit(train, &trial_windows, &trial_setup) {
            Ok((model, report)) => {
                record.fit_seconds = report.fit_seconds;
                record.mean_gmres_iters = report.mean_gmres_iterations();
                record.ipm_iters = report.outcome.iterations();
                record.status = report.status();
                if record.status != IpmStatus::Stalled {
                    let start = Instant::now();
                    let predictions = model.predict(&validation.points, predict_backend)?;
                    record.predict_seconds = start.elapsed().as_secs_f64();
                    let acc = accuracy(&predictions, &validation.labels)?;
                    record.accuracy = Some(acc);
                    if best.as_ref().is_none_or(|b| acc > b.1) {
                        best = Some((trial, acc, trial_windows, model));
                    }
                }
            }
            Err(Error::Stalled { iterations }) => record.ipm_iters = iterations,
            Err(e) => return Err(e),
        }
        log::info!(
            "trial {trial}: C={:.4} accuracy={:?} status={:?}",
            record.c,
            record.accuracy,
            record.status
        );
        log.push(record);
    }

    match best {
        Some((best, _, windowing, model)) => Ok(TuningResult {
            best,
            c: log[best].c,
            windowing,
            model,
            log,
        }),
        None => Err(Error::AllTrialsStalled {
            trials: log.len(),
            log,
        }),
    }
}

/// Writes the trial log as CSV with columns `trial, ell_1..ell_P, C,
/// accuracy, fit_seconds, predict_seconds, mean_gmres_iters, ipm_iters,
/// status`. Missing accuracies are empty fields.
pub fn write_trial_log<W: Write>(log: &[TrialRecord], writer: W) -> Result<()> {
    let p = log.first().map_or(0, |r| r.length_scales.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["trial".to_string()];
    header.extend((1..=p).map(|l| format!("ell_{l}")));
    header.extend(
        [
            "C",
            "accuracy",
            "fit_seconds",
            "predict_seconds",
            "mean_gmres_iters",
            "ipm_iters",
            "status",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(csv_error)?;
    for r in log {
        let mut row = vec![r.trial.to_string()];
        row.extend(r.length_scales.iter().map(f64::to_string));
        row.push(r.c.to_string());
        row.push(r.accuracy.map_or(String::new(), |a| a.to_string()));
        row.push(r.fit_seconds.to_string());
        row.push(r.predict_seconds.to_string());
        row.push(r.mean_gmres_iters.to_string());
        row.push(r.ipm_iters.to_string());
        row.push(r.status.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing trial log: {e}")))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Data(format!("writing trial log: {e}"))
}
