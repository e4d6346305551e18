//! LIBSVM sparse-format ingestion and feature scaling.

use super::BenchError;
use crate::linops::{CsrMatrix, Matrix};
use ndarray::Array1;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// A labeled dataset with rows as samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    pub samples: Matrix,
    /// Labels normalized to `{-1, +1}`.
    pub labels: Array1<f64>,
    /// Whether [`scale_features`] has run.
    pub scaled: bool,
}

/// Reads a file of lines `label index:value index:value ...` with 1-based,
/// strictly increasing feature indices per line. Labels must be `-1/+1` or
/// `0/1`; in the latter case `0` maps to `-1`. The feature count is the
/// largest index seen. Blank lines are ignored.
pub fn read_libsvm(path: impl AsRef<Path>) -> Result<DatasetTable, BenchError> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut ncols = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(first) = tokens.next() else { continue };
        let label: f64 = first.parse().map_err(|_| BenchError::Parse {
            line: lineno,
            message: format!("bad label {first:?}"),
        })?;

        let mut row = Vec::new();
        let mut prev_index = 0usize;
        for token in tokens {
            let (idx, val) = token.split_once(':').ok_or_else(|| BenchError::Parse {
                line: lineno,
                message: format!("expected index:value, got {token:?}"),
            })?;
            let index: usize = idx.parse().map_err(|_| BenchError::Parse {
                line: lineno,
                message: format!("bad feature index {idx:?}"),
            })?;
            let value: f64 = val.parse().map_err(|_| BenchError::Parse {
                line: lineno,
                message: format!("bad feature value {val:?}"),
            })?;
            if index == 0 {
                return Err(BenchError::Parse {
                    line: lineno,
                    message: "feature indices are 1-based".into(),
                });
            }
            if index <= prev_index {
                return Err(BenchError::Parse {
                    line: lineno,
                    message: format!("feature index {index} does not increase past {prev_index}"),
                });
            }
            prev_index = index;
            ncols = ncols.max(index);
            row.push((index - 1, value));
        }
        labels.push(label);
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(BenchError::EmptyFile);
    }
    let labels = normalize_labels(labels)?;
    let samples =
        Matrix::Sparse(CsrMatrix::from_rows(ncols, &rows).expect("rows are parse-ordered"));
    Ok(DatasetTable { samples, labels, scaled: false })
}

fn normalize_labels(raw: Vec<f64>) -> Result<Array1<f64>, BenchError> {
    let pm_one = raw.iter().all(|&v| v == -1.0 || v == 1.0);
    if pm_one {
        return Ok(Array1::from_vec(raw));
    }
    let zero_one = raw.iter().all(|&v| v == 0.0 || v == 1.0);
    if zero_one {
        return Ok(Array1::from_vec(raw).mapv(|v| if v == 0.0 { -1.0 } else { 1.0 }));
    }
    let mut distinct: Vec<f64> = raw.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("labels are finite"));
    distinct.dedup();
    Err(BenchError::BadLabels { found: format!("{distinct:?}") })
}

/// Divides every feature column by its maximum absolute value so all entries
/// land in `[-1, 1]`; all-zero columns are left alone. Idempotent.
pub fn scale_features(table: DatasetTable) -> DatasetTable {
    if table.scaled {
        return table;
    }
    let mut samples = table.samples;
    let factors = samples.col_abs_max().mapv(|m| if m > 0.0 { 1.0 / m } else { 1.0 });
    samples.scale_columns(&factors);
    DatasetTable { samples, labels: table.labels, scaled: true }
}
