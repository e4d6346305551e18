//! Benchmark harness: synthetic compressed-sensing instances, LIBSVM-format
//! dataset ingestion with feature scaling, penalty-weight selection rules,
//! solution metrics, and CSV emission.
//!
//! Everything here is deterministic given explicit seeds, so benchmark
//! tables reproduce bit-for-bit across runs and platforms.

mod data;
mod libsvm;
mod metrics;

pub use data::{gen_cs, CsInstance, NormalSampler};
pub use libsvm::{read_libsvm, scale_features, DatasetTable};
pub use metrics::{
    accuracy, lambda_rule_cs, lambda_rule_cs_with, lambda_rule_svm, median, median_row,
    metric_row_cs, metric_row_svm, parse_csv, relative_error, write_csv, write_trace, MetricRow,
    CSV_HEADER, TRACE_HEADER,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("instance shape must have at least one row and column, got {m} x {n}")]
    BadShape { m: usize, n: usize },
    #[error("sparsity level must satisfy 1 <= s <= n, got s = {s} with n = {n}")]
    BadSparsity { s: usize, n: usize },
    #[error("matrix density must lie in (0, 1], got {0}")]
    BadDensity(f64),
    #[error("noise factor must be finite and nonnegative, got {0}")]
    BadNoise(f64),
    #[error("response is orthogonal to every column; the penalty scale is undefined")]
    ZeroResponse,
    #[error("no named penalty factor for q = {q}; supply one explicitly")]
    NoNamedFactor { q: f64 },
    #[error(
        "penalty rule gave lambda = {lambda} (needs more features than samples); \
         set lambda manually"
    )]
    DegenerateLambda { lambda: f64 },
    #[error("ground truth is the zero vector; relative error is undefined")]
    ZeroTruth,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset file contains no samples")]
    EmptyFile,
    #[error("labels must be -1/+1 or 0/1, found {found}")]
    BadLabels { found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
