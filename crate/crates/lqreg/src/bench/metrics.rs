//! Solution metrics, penalty-weight selection rules, and CSV emission.

use super::{BenchError, DatasetTable};
use crate::linops::{norm2, norm_inf, Matrix};
use crate::solver::{SolveReport, SolveStatus};
use ndarray::Array1;
use std::io::{self, Write};

/// One result cell: a solver run (or a median over trials) on one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub algorithm: String,
    pub q: f64,
    /// Smooth objective value at the solution.
    pub f_value: f64,
    /// Relative recovery error against a known ground truth.
    pub re_err: Option<f64>,
    /// Classification accuracy.
    pub acc: Option<f64>,
    pub support_size: usize,
    pub time_seconds: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// `||x - x_true|| / ||x_true||`.
pub fn relative_error(x: &Array1<f64>, x_true: &Array1<f64>) -> Result<f64, BenchError> {
    let scale = norm2(x_true);
    if scale == 0.0 {
        return Err(BenchError::ZeroTruth);
    }
    Ok(norm2(&(x - x_true)) / scale)
}

/// Fraction of samples whose label matches the sign of the decision value.
/// A decision value of exactly zero counts as a miss.
pub fn accuracy(samples: &Matrix, labels: &Array1<f64>, x: &Array1<f64>) -> f64 {
    let decisions = samples.matvec(x);
    let correct = decisions
        .iter()
        .zip(labels.iter())
        .filter(|&(&t, &y)| {
            let sign = if t > 0.0 {
                1.0
            } else if t < 0.0 {
                -1.0
            } else {
                0.0
            };
            y * sign > 0.0
        })
        .count();
    correct as f64 / labels.len() as f64
}

/// Median of a nonempty slice; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median input must be finite"));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Penalty weight `a * ||A^T b||_inf` with the standard factor for the given
/// exponent: `a = 0.02` at `q = 0`, `0.03` at `q = 1/2`, `0.04` at `q = 2/3`.
/// Other exponents have no named factor; use [`lambda_rule_cs_with`].
pub fn lambda_rule_cs(matrix: &Matrix, response: &Array1<f64>, q: f64) -> Result<f64, BenchError> {
    let factor = if q == 0.0 {
        0.02
    } else if q == 0.5 {
        0.03
    } else if (q - 2.0 / 3.0).abs() <= 1e-9 {
        0.04
    } else {
        return Err(BenchError::NoNamedFactor { q });
    };
    lambda_rule_cs_with(matrix, response, factor)
}

/// Penalty weight `factor * ||A^T b||_inf` with an explicit factor.
pub fn lambda_rule_cs_with(
    matrix: &Matrix,
    response: &Array1<f64>,
    factor: f64,
) -> Result<f64, BenchError> {
    let scale = norm_inf(&matrix.matvec_t(response));
    if scale == 0.0 {
        return Err(BenchError::ZeroResponse);
    }
    Ok(factor * scale)
}

/// Penalty and ridge weights for the SVM model:
/// `lambda = mu = (0.0003 log2(n/m) / m) * ||A^T y||_inf`. Requires more
/// features than samples, otherwise the log factor is nonpositive.
pub fn lambda_rule_svm(table: &DatasetTable) -> Result<(f64, f64), BenchError> {
    let m = table.samples.nrows() as f64;
    let n = table.samples.ncols() as f64;
    let scale = norm_inf(&table.samples.matvec_t(&table.labels));
    let lambda = 0.0003 * (n / m).log2() / m * scale;
    if !(lambda > 0.0) {
        return Err(BenchError::DegenerateLambda { lambda });
    }
    Ok((lambda, lambda))
}

/// Builds a recovery-experiment row: relative error against `x_true`.
pub fn metric_row_cs(
    algorithm: impl Into<String>,
    q: f64,
    report: &SolveReport,
    x_true: &Array1<f64>,
) -> Result<MetricRow, BenchError> {
    Ok(MetricRow {
        algorithm: algorithm.into(),
        q,
        f_value: report.f_value,
        re_err: Some(relative_error(&report.x_final, x_true)?),
        acc: None,
        support_size: report.support.len(),
        time_seconds: report.seconds,
        iterations: report.iterations,
        status: report.status,
    })
}

/// Builds a classification-experiment row: accuracy on the given table.
pub fn metric_row_svm(
    algorithm: impl Into<String>,
    q: f64,
    report: &SolveReport,
    table: &DatasetTable,
) -> MetricRow {
    MetricRow {
        algorithm: algorithm.into(),
        q,
        f_value: report.f_value,
        re_err: None,
        acc: Some(accuracy(&table.samples, &table.labels, &report.x_final)),
        support_size: report.support.len(),
        time_seconds: report.seconds,
        iterations: report.iterations,
        status: report.status,
    }
}

/// Collapses per-trial rows into one aggregate row: medians for the numeric
/// fields (iterations rounded), the worst status across trials.
pub fn median_row(rows: &[MetricRow]) -> MetricRow {
    assert!(!rows.is_empty(), "median_row over no trials");
    let collect = |f: &dyn Fn(&MetricRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    let optional = |f: &dyn Fn(&MetricRow) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = rows.iter().filter_map(f).collect();
        (values.len() == rows.len()).then(|| median(&values))
    };
    MetricRow {
        algorithm: rows[0].algorithm.clone(),
        q: rows[0].q,
        f_value: median(&collect(&|r| r.f_value)),
        re_err: optional(&|r| r.re_err),
        acc: optional(&|r| r.acc),
        support_size: median(&collect(&|r| r.support_size as f64)).round() as usize,
        time_seconds: median(&collect(&|r| r.time_seconds)),
        iterations: median(&collect(&|r| r.iterations as f64)).round() as usize,
        status: rows.iter().map(|r| r.status).max_by_key(|s| status_rank(*s)).unwrap(),
    }
}

fn status_rank(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::StationaryStop => 0,
        SolveStatus::MaxIter => 1,
        SolveStatus::LineSearchStall => 2,
        SolveStatus::NumericFailure => 3,
    }
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::StationaryStop => "stationary",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::LineSearchStall => "stall",
        SolveStatus::NumericFailure => "numeric_failure",
    }
}

fn parse_status(text: &str) -> Option<SolveStatus> {
    Some(match text {
        "stationary" => SolveStatus::StationaryStop,
        "max_iter" => SolveStatus::MaxIter,
        "stall" => SolveStatus::LineSearchStall,
        "numeric_failure" => SolveStatus::NumericFailure,
        _ => return None,
    })
}

/// Six significant digits, shortest exact form for zero and non-finite
/// values. Re-parsing and re-printing a formatted value is a fixed point,
/// so emitted CSV files are canonical.
fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.is_finite() {
        format!("{v:.5e}")
    } else {
        format!("{v}")
    }
}

pub const CSV_HEADER: &str = "algo,q,f,re_err,acc,nnz,time,iters,status";

/// Writes rows under [`CSV_HEADER`]; absent optional metrics are empty cells.
pub fn write_csv<W: Write>(mut out: W, rows: &[MetricRow]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.algorithm,
            fmt_sig(row.q),
            fmt_sig(row.f_value),
            row.re_err.map(fmt_sig).unwrap_or_default(),
            row.acc.map(fmt_sig).unwrap_or_default(),
            row.support_size,
            fmt_sig(row.time_seconds),
            row.iterations,
            status_str(row.status),
        )?;
    }
    Ok(())
}

/// Parses text produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<MetricRow>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(BenchError::Parse {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}, got {header:?}"),
            })
        }
        None => return Err(BenchError::EmptyFile),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(BenchError::Parse {
                line: lineno,
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let number = |text: &str, what: &str| -> Result<f64, BenchError> {
            text.parse().map_err(|_| BenchError::Parse {
                line: lineno,
                message: format!("bad {what} {text:?}"),
            })
        };
        let count = |text: &str, what: &str| -> Result<usize, BenchError> {
            text.parse().map_err(|_| BenchError::Parse {
                line: lineno,
                message: format!("bad {what} {text:?}"),
            })
        };
        let opt = |text: &str, what: &str| -> Result<Option<f64>, BenchError> {
            if text.is_empty() { Ok(None) } else { number(text, what).map(Some) }
        };
        rows.push(MetricRow {
            algorithm: fields[0].to_string(),
            q: number(fields[1], "q")?,
            f_value: number(fields[2], "objective")?,
            re_err: opt(fields[3], "relative error")?,
            acc: opt(fields[4], "accuracy")?,
            support_size: count(fields[5], "support size")?,
            time_seconds: number(fields[6], "time")?,
            iterations: count(fields[7], "iteration count")?,
            status: parse_status(fields[8]).ok_or_else(|| BenchError::Parse {
                line: lineno,
                message: format!("unknown status {:?}", fields[8]),
            })?,
        });
    }
    Ok(rows)
}

pub const TRACE_HEADER: &str = "k,F,grad_inf,supp,alpha,beta,newton";

/// Writes the per-iteration trace of a solve, one line per iteration under
/// [`TRACE_HEADER`]; `beta` is empty on iterations that kept the proximal
/// point and `newton` is 1 when the Newton step was accepted.
pub fn write_trace<W: Write>(mut out: W, report: &SolveReport) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for row in &report.trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.iter,
            fmt_sig(row.objective),
            fmt_sig(row.grad_inf),
            row.support.len(),
            fmt_sig(row.alpha),
            row.beta.map(fmt_sig).unwrap_or_default(),
            u8::from(row.newton_accepted),
        )?;
    }
    Ok(())
}
