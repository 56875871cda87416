use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use super::{map_label, Dataset, RawTable};
use crate::error::{Error, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    /// 0-based column index.
    Index(usize),
    /// Header name; requires a header row.
    Name(String),
    Last,
    /// Unlabeled input.
    None,
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            "none" => LabelColumn::None,
            _ => match s.parse() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<Dataset> {
    if *label_column == LabelColumn::None {
        return Err(Error::Config(
            "a label column is required for training data".into(),
        ));
    }
    read_csv_table(path, label_column)?.into_dataset()
}

/// Reads a numeric CSV file. A header row is detected when none of the
/// fields in the first record parse as numbers.
pub fn read_csv_table(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, &path.display().to_string(), label_column)
}

pub(crate) fn parse_csv<R: std::io::Read>(
    reader: R,
    source: &str,
    label_column: &LabelColumn,
) -> Result<RawTable> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: source.to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((
            rec.position().map_or(i as u64 + 1, |p| p.line()) as usize,
            rec,
        ));
    }
    if records.is_empty() {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 0,
            message: "file contains no data".into(),
        });
    }

    let first = &records[0].1;
    let has_header = matches!(label_column, LabelColumn::Name(_))
        || first.iter().all(|f| f.parse::<f64>().is_err());
    let header: Option<Vec<String>> =
        has_header.then(|| first.iter().map(str::to_string).collect());
    let ncols = first.len();

    let label_idx = match label_column {
        LabelColumn::Index(i) if *i < ncols => Some(*i),
        LabelColumn::Index(i) => {
            return Err(Error::Config(format!(
                "label column {i} out of range for {ncols} columns"
            )))
        }
        LabelColumn::Last => Some(ncols - 1),
        LabelColumn::None => None,
        LabelColumn::Name(name) => Some(
            header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| Error::Config(format!("no column named `{name}`")))?,
        ),
    };

    let data = if has_header {
        &records[1..]
    } else {
        &records[..]
    };
    let d = ncols - usize::from(label_idx.is_some());
    let mut values = Vec::with_capacity(data.len() * d);
    let mut labels = Vec::with_capacity(data.len());

    for (row_no, (line, rec)) in data.iter().enumerate() {
        if rec.len() != ncols {
            return Err(Error::Parse {
                path: source.to_string(),
                line: *line,
                message: format!("expected {ncols} columns, found {}", rec.len()),
            });
        }
        let cell_err = |column: usize, message: String| Error::Cell {
            path: source.to_string(),
            row: row_no + 1,
            column: column + 1,
            message,
        };
        for (j, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(cell_err(j, "missing value".into()));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| cell_err(j, format!("`{field}` is not numeric")))?;
            if Some(j) == label_idx {
                labels
                    .push(map_label(v).ok_or_else(|| {
                        cell_err(j, format!("label `{field}` is not -1, 0 or 1"))
                    })?);
            } else {
                values.push(v);
            }
        }
    }

    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != label_idx)
            .map(|(_, name)| name)
            .collect()
    });
    Ok(RawTable {
        points: DMatrix::from_row_slice(data.len(), d, &values),
        labels: label_idx.map(|_| labels),
        feature_names,
    })
}
