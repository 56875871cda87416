//! Labeled point sets: ingestion, preprocessing and feature windowing.

mod csv;
mod libsvm;
mod preprocess;
mod windows;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{load_csv, read_csv_table, LabelColumn};
pub use self::libsvm::{load_libsvm, read_libsvm_table};
pub use self::preprocess::{balance_and_split, zscore_fit_transform, TrainTestSplit};
pub use self::windows::{build_windows, mutual_information_scores, FeatureWindowing, MI_CLIP};

/// Dense labeled point set. Row `i` of `points` is the feature vector of
/// sample `i`; `labels[i]` is `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: DMatrix<f64>,
    pub labels: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
    pub normalization: Option<Normalization>,
}

/// Per-feature z-score statistics computed on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Population standard deviation; `1.0` for constant columns.
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Transforms every row of `points` in place.
    pub fn apply(&self, points: &mut DMatrix<f64>) -> Result<()> {
        if points.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        for (j, mut col) in points.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.apply(|x| *x = (*x - m) / s);
        }
        Ok(())
    }
}

/// Points with optional labels, as read from disk before validation.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub points: DMatrix<f64>,
    pub labels: Option<Vec<f64>>,
    pub feature_names: Option<Vec<String>>,
}

impl RawTable {
    pub fn into_dataset(self) -> Result<Dataset> {
        let labels = self
            .labels
            .ok_or_else(|| Error::Data("input has no labels".into()))?;
        let mut ds = Dataset::new(self.points, labels)?;
        ds.feature_names = self.feature_names;
        Ok(ds)
    }
}

/// Maps a numeric label to `{-1, +1}`: `1 -> +1`, `-1` and `0 -> -1`.
pub fn map_label(value: f64) -> Option<f64> {
    if value == 1.0 {
        Some(1.0)
    } else if value == -1.0 || value == 0.0 {
        Some(-1.0)
    } else {
        None
    }
}

impl Dataset {
    pub fn new(points: DMatrix<f64>, labels: Vec<f64>) -> Result<Self> {
        if points.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: points.nrows(),
                got: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::Data(format!("label {bad} is not -1 or +1")));
        }
        Ok(Self {
            points,
            labels,
            feature_names: None,
            normalization: None,
        })
    }

    /// Builds a dataset from row vectors.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
            });
        }
        let points = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(points, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// `(positive, negative)` label counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (pos, self.len() - pos)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// Rows selected by `indices`, in that order; metadata is carried over.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: self.points.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Same points with every label negated.
    pub fn with_flipped_labels(&self) -> Dataset {
        let mut out = self.clone();
        out.labels.iter_mut().for_each(|y| *y = -*y);
        out
    }
}
