use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::{map_label, Dataset, RawTable};
use crate::error::{Error, Result};

/// Reads a LIBSVM/SVMlight text file into a dense, labeled [`Dataset`].
///
/// `dim` overrides the feature count; by default it is the largest index seen.
pub fn load_libsvm(path: impl AsRef<Path>, dim: Option<usize>) -> Result<Dataset> {
    let table = read_libsvm_table(path, dim)?;
    if table.labels.is_none() {
        return Err(Error::Data("LIBSVM input has no labels".into()));
    }
    table.into_dataset()
}

/// Like [`load_libsvm`] but accepts unlabeled files, where every line is
/// just `idx:val` pairs.
pub fn read_libsvm_table(path: impl AsRef<Path>, dim: Option<usize>) -> Result<RawTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_libsvm(&text, &path.display().to_string(), dim)
}

pub(crate) fn parse_libsvm(text: &str, source: &str, dim: Option<usize>) -> Result<RawTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut labeled: Option<bool> = None;
    let mut max_index = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace().peekable();
        let has_label = !tokens.peek().is_some_and(|t| t.contains(':'));
        match labeled {
            None => labeled = Some(has_label),
            Some(l) if l != has_label => {
                return Err(err(lineno, "mixed labeled and unlabeled lines".into()))
            }
            _ => {}
        }
        if has_label {
            let tok = tokens.next().unwrap_or_default();
            let value: f64 = tok
                .parse()
                .map_err(|_| err(lineno, format!("invalid label `{tok}`")))?;
            let y = map_label(value)
                .ok_or_else(|| err(lineno, format!("label {tok} is not one of -1, 0, +1")))?;
            labels.push(y);
        }

        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(lineno, format!("expected `index:value`, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err(lineno, "feature indices are 1-based".into()));
            }
            if idx <= prev {
                return Err(err(
                    lineno,
                    format!("feature index {idx} is not increasing"),
                ));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(lineno, format!("invalid feature value `{val}`")))?;
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(err(0, "file contains no data".into()));
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: max_index,
            })
        }
        Some(d) => d,
        None => max_index,
    };

    let mut points = DMatrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            points[(i, j)] = v;
        }
    }
    Ok(RawTable {
        points,
        labels: (labeled == Some(true)).then_some(labels),
        feature_names: None,
    })
}
