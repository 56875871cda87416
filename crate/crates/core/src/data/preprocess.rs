use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Normalization};
use crate::error::{Error, Result};

/// Output of [`balance_and_split`].
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    /// Class-balanced training split.
    pub train: Dataset,
    /// Held-out split, never balanced.
    pub test: Dataset,
    /// Majority-class training rows dropped by balancing.
    pub discarded: usize,
}

/// Stratified random split followed by majority-class down-sampling of the
/// training part.
///
/// Each class is shuffled independently and its first
/// `floor(train_fraction * count)` members go to the training split, so a
/// class-balanced input yields a balanced training split with nothing
/// discarded.
pub fn balance_and_split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<TrainTestSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| data.labels[i] > 0.0);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Data("both classes must be present".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_by_class = Vec::with_capacity(2);
    let mut test = Vec::new();
    for mut class in [pos, neg] {
        class.shuffle(&mut rng);
        let k = (train_fraction * class.len() as f64).floor() as usize;
        test.extend_from_slice(&class[k..]);
        class.truncate(k);
        train_by_class.push(class);
    }

    let keep = train_by_class.iter().map(Vec::len).min().unwrap_or(0);
    if 2 * keep < 2 {
        return Err(Error::Data(
            "balancing leaves fewer than 2 training points".into(),
        ));
    }
    let mut discarded = 0;
    let mut train = Vec::with_capacity(2 * keep);
    for class in &train_by_class {
        // classes were shuffled, so truncation is a uniform draw without replacement
        discarded += class.len() - keep;
        train.extend_from_slice(&class[..keep]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);

    Ok(TrainTestSplit {
        train: data.subset(&train),
        test: data.subset(&test),
        discarded,
    })
}

/// Fits per-feature z-score statistics on `train` and applies them to both
/// splits. Constant columns keep `std = 1` and become all zeros.
pub fn zscore_fit_transform(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    if train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            got: test.dim(),
        });
    }
    let n = train.len() as f64;
    let mut mean = Vec::with_capacity(train.dim());
    let mut std = Vec::with_capacity(train.dim());
    for col in train.points.column_iter() {
        let m = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        let s = var.sqrt();
        mean.push(m);
        std.push(if s > 1e-12 * m.abs().max(1.0) { s } else { 1.0 });
    }
    let stats = Normalization { mean, std };

    let mut out_train = train.clone();
    let mut out_test = test.clone();
    stats.apply(&mut out_train.points)?;
    stats.apply(&mut out_test.points)?;
    out_train.normalization = Some(stats.clone());
    out_test.normalization = Some(stats);
    Ok((out_train, out_test))
}
