//! Dense and sparse linear-algebra kernels.
//!
//! [`Matrix`] wraps either a dense `ndarray` matrix or a [`CsrMatrix`] behind
//! one operator interface: matrix-vector products, transpose products,
//! restricted-column products, and weighted Gram sub-blocks. [`solve_direct`]
//! factors small symmetric systems (LDL^T); [`solve_cg`] runs conjugate
//! gradient against a matrix-free operator and reports nonpositive curvature
//! instead of silently looping. Solve failures are values, not panics: the
//! caller decides what a breakdown means.

use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("row {row}: column index {col} out of bounds for {ncols} columns")]
    ColumnOutOfBounds { row: usize, col: usize, ncols: usize },
    #[error("row {row}: column indices must be strictly increasing")]
    UnsortedRow { row: usize },
    #[error("index pointer array has length {got}, expected {expected}")]
    BadIndptr { got: usize, expected: usize },
    #[error("index/value arrays have mismatched lengths ({indices} vs {values})")]
    LengthMismatch { indices: usize, values: usize },
}

/// Outcome of a linear solve that did not produce a usable direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SolveFailure {
    #[error("matrix is singular or numerically breaks the factorization")]
    Singular,
    #[error("operator has nonpositive curvature along a search direction")]
    NonpositiveCurvature,
    #[error("conjugate gradient did not reach the residual tolerance")]
    NoConvergence,
}

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixError> {
        if indptr.len() != nrows + 1 {
            return Err(MatrixError::BadIndptr { got: indptr.len(), expected: nrows + 1 });
        }
        if indices.len() != values.len() {
            return Err(MatrixError::LengthMismatch {
                indices: indices.len(),
                values: values.len(),
            });
        }
        for row in 0..nrows {
            let (lo, hi) = (indptr[row], indptr[row + 1]);
            let mut prev: Option<usize> = None;
            for &col in &indices[lo..hi] {
                if col >= ncols {
                    return Err(MatrixError::ColumnOutOfBounds { row, col, ncols });
                }
                if prev.is_some_and(|p| p >= col) {
                    return Err(MatrixError::UnsortedRow { row });
                }
                prev = Some(col);
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Builds from per-row `(column, value)` lists; each list must be sorted.
    pub fn from_rows(
        ncols: usize,
        rows: &[Vec<(usize, f64)>],
    ) -> Result<Self, MatrixError> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self::new(rows.len(), ncols, indptr, indices, values)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }
}

/// Set of column indices with an O(1) membership/position lookup.
#[derive(Debug, Clone)]
pub struct ColumnSet {
    cols: Vec<usize>,
    pos: Vec<u32>,
}

const NOT_IN_SET: u32 = u32::MAX;

impl ColumnSet {
    /// `cols` must contain distinct indices below `ncols`.
    pub fn new(ncols: usize, cols: &[usize]) -> Self {
        let mut pos = vec![NOT_IN_SET; ncols];
        for (p, &j) in cols.iter().enumerate() {
            assert!(j < ncols, "column {j} out of bounds for {ncols} columns");
            assert!(pos[j] == NOT_IN_SET, "duplicate column {j} in column set");
            pos[j] = p as u32;
        }
        Self { cols: cols.to_vec(), pos }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    fn position(&self, j: usize) -> Option<usize> {
        match self.pos[j] {
            NOT_IN_SET => None,
            p => Some(p as usize),
        }
    }
}

/// Row-sample matrix stored dense or sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(Array2<f64>),
    Sparse(CsrMatrix),
}

impl Matrix {
    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.nrows(),
            Matrix::Sparse(a) => a.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(a) => a.ncols(),
            Matrix::Sparse(a) => a.ncols,
        }
    }

    /// `A x`.
    pub fn matvec(&self, x: &Array1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.ncols(), "matvec dimension mismatch");
        match self {
            Matrix::Dense(a) => a.dot(x),
            Matrix::Sparse(a) => {
                let mut out = Array1::zeros(a.nrows);
                for i in 0..a.nrows {
                    let (cols, vals) = a.row(i);
                    let mut acc = 0.0;
                    for (&j, &v) in cols.iter().zip(vals) {
                        acc += v * x[j];
                    }
                    out[i] = acc;
                }
                out
            }
        }
    }

    /// `A^T y`.
    pub fn matvec_t(&self, y: &Array1<f64>) -> Array1<f64> {
        assert_eq!(y.len(), self.nrows(), "matvec_t dimension mismatch");
        match self {
            Matrix::Dense(a) => a.t().dot(y),
            Matrix::Sparse(a) => {
                let mut out = Array1::zeros(a.ncols);
                for i in 0..a.nrows {
                    let yi = y[i];
                    if yi == 0.0 {
                        continue;
                    }
                    let (cols, vals) = a.row(i);
                    for (&j, &v) in cols.iter().zip(vals) {
                        out[j] += v * yi;
                    }
                }
                out
            }
        }
    }

    /// `A[:, S] v` where `v` is indexed by position within `S`.
    pub fn matvec_cols(&self, set: &ColumnSet, v: &Array1<f64>) -> Array1<f64> {
        assert_eq!(v.len(), set.len(), "restricted matvec dimension mismatch");
        let mut out = Array1::zeros(self.nrows());
        match self {
            Matrix::Dense(a) => {
                for (p, &j) in set.cols().iter().enumerate() {
                    let vp = v[p];
                    if vp == 0.0 {
                        continue;
                    }
                    let col = a.column(j);
                    for (o, &c) in out.iter_mut().zip(col.iter()) {
                        *o += c * vp;
                    }
                }
            }
            Matrix::Sparse(a) => {
                for i in 0..a.nrows {
                    let (cols, vals) = a.row(i);
                    let mut acc = 0.0;
                    for (&j, &c) in cols.iter().zip(vals) {
                        if let Some(p) = set.position(j) {
                            acc += c * v[p];
                        }
                    }
                    out[i] = acc;
                }
            }
        }
        out
    }

    /// `(A^T y)` restricted to the columns in `S`, in set order.
    pub fn cols_dot(&self, set: &ColumnSet, y: &Array1<f64>) -> Array1<f64> {
        assert_eq!(y.len(), self.nrows(), "restricted transpose dimension mismatch");
        let mut out = Array1::zeros(set.len());
        match self {
            Matrix::Dense(a) => {
                for (p, &j) in set.cols().iter().enumerate() {
                    out[p] = a.column(j).dot(y);
                }
            }
            Matrix::Sparse(a) => {
                for i in 0..a.nrows {
                    let yi = y[i];
                    if yi == 0.0 {
                        continue;
                    }
                    let (cols, vals) = a.row(i);
                    for (&j, &c) in cols.iter().zip(vals) {
                        if let Some(p) = set.position(j) {
                            out[p] += c * yi;
                        }
                    }
                }
            }
        }
        out
    }

    /// Weighted Gram sub-block `A[:, S]^T diag(w) A[:, S]` (unweighted when
    /// `weights` is `None`). Symmetric by construction.
    pub fn weighted_gram(&self, set: &ColumnSet, weights: Option<&Array1<f64>>) -> Array2<f64> {
        if let Some(w) = weights {
            assert_eq!(w.len(), self.nrows(), "weight vector dimension mismatch");
        }
        let k = set.len();
        let mut gram = Array2::zeros((k, k));
        match self {
            Matrix::Dense(a) => {
                let mut row_s = vec![0.0; k];
                for i in 0..a.nrows() {
                    let wi = weights.map_or(1.0, |w| w[i]);
                    if wi == 0.0 {
                        continue;
                    }
                    let row = a.row(i);
                    for (p, &j) in set.cols().iter().enumerate() {
                        row_s[p] = row[j];
                    }
                    rank_one_update(&mut gram, &row_s, wi);
                }
            }
            Matrix::Sparse(a) => {
                let mut entry_pos = Vec::new();
                let mut entry_val = Vec::new();
                for i in 0..a.nrows {
                    let wi = weights.map_or(1.0, |w| w[i]);
                    if wi == 0.0 {
                        continue;
                    }
                    entry_pos.clear();
                    entry_val.clear();
                    let (cols, vals) = a.row(i);
                    for (&j, &c) in cols.iter().zip(vals) {
                        if let Some(p) = set.position(j) {
                            entry_pos.push(p);
                            entry_val.push(c);
                        }
                    }
                    for (a_idx, &p) in entry_pos.iter().enumerate() {
                        let vp = entry_val[a_idx] * wi;
                        for (b_idx, &r) in entry_pos.iter().enumerate() {
                            gram[[p, r]] += vp * entry_val[b_idx];
                        }
                    }
                }
            }
        }
        gram
    }

    /// Squared L2 norm of each column.
    pub fn col_norms_sq(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.ncols());
        match self {
            Matrix::Dense(a) => {
                for (j, col) in a.columns().into_iter().enumerate() {
                    out[j] = col.dot(&col);
                }
            }
            Matrix::Sparse(a) => {
                for (&j, &v) in a.indices.iter().zip(&a.values) {
                    out[j] += v * v;
                }
            }
        }
        out
    }

    /// Largest absolute entry of each column (zero for empty columns).
    pub fn col_abs_max(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.ncols());
        match self {
            Matrix::Dense(a) => {
                for (j, col) in a.columns().into_iter().enumerate() {
                    out[j] = col.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                }
            }
            Matrix::Sparse(a) => {
                for (&j, &v) in a.indices.iter().zip(&a.values) {
                    out[j] = out[j].max(v.abs());
                }
            }
        }
        out
    }

    /// Multiplies column `j` by `factors[j]` in place.
    pub fn scale_columns(&mut self, factors: &Array1<f64>) {
        assert_eq!(factors.len(), self.ncols(), "scale_columns dimension mismatch");
        match self {
            Matrix::Dense(a) => {
                for (j, mut col) in a.columns_mut().into_iter().enumerate() {
                    col.mapv_inplace(|v| v * factors[j]);
                }
            }
            Matrix::Sparse(a) => {
                for (&j, v) in a.indices.iter().zip(a.values.iter_mut()) {
                    *v *= factors[j];
                }
            }
        }
    }
}

fn rank_one_update(gram: &mut Array2<f64>, row: &[f64], weight: f64) {
    let k = row.len();
    for p in 0..k {
        let vp = row[p] * weight;
        if vp == 0.0 {
            continue;
        }
        for r in 0..k {
            gram[[p, r]] += vp * row[r];
        }
    }
}

pub fn norm2(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

pub fn norm_inf(x: &Array1<f64>) -> f64 {
    x.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
}

/// Solves the symmetric system `m d = rhs` by LDL^T factorization.
///
/// Fails with [`SolveFailure::Singular`] when a pivot falls below
/// `1e-12 * max|m_ij|` or when the computed solution does not reproduce the
/// right-hand side to `1e-10 * (1 + ||rhs||)`.
pub fn solve_direct(m: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>, SolveFailure> {
    let n = m.nrows();
    assert_eq!(m.ncols(), n, "solve_direct requires a square matrix");
    assert_eq!(rhs.len(), n, "solve_direct dimension mismatch");
    if n == 0 {
        return Ok(Array1::zeros(0));
    }
    let scale = m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(SolveFailure::Singular);
    }
    let pivot_floor = 1e-12 * scale;

    // Lower-triangular factor stored in `l`, diagonal of D in `d`.
    let mut l = m.clone();
    let mut d = vec![0.0f64; n];
    for j in 0..n {
        let mut dj = l[[j, j]];
        for k in 0..j {
            let ljk = l[[j, k]];
            dj -= ljk * ljk * d[k];
        }
        if dj.abs() < pivot_floor {
            return Err(SolveFailure::Singular);
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut v = l[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]] * d[k];
            }
            l[[i, j]] = v / dj;
        }
    }

    // Forward solve L z = rhs, scale by D, back solve L^T x = z.
    let mut x = rhs.clone();
    for i in 0..n {
        let mut v = x[i];
        for k in 0..i {
            v -= l[[i, k]] * x[k];
        }
        x[i] = v;
    }
    for i in 0..n {
        x[i] /= d[i];
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for k in (i + 1)..n {
            v -= l[[k, i]] * x[k];
        }
        x[i] = v;
    }

    let residual = {
        let r = m.dot(&x) - rhs;
        norm2(&r)
    };
    if !residual.is_finite() || residual > 1e-10 * (1.0 + norm2(rhs)) {
        return Err(SolveFailure::Singular);
    }
    Ok(x)
}

/// Conjugate gradient for a symmetric positive definite operator.
///
/// Terminates when `||r|| <= tol * max(||rhs||, tiny)`; reports
/// [`SolveFailure::NonpositiveCurvature`] as soon as a search direction `p`
/// has `p^T M p <= 0`, and [`SolveFailure::NoConvergence`] after `max_iter`
/// products.
pub fn solve_cg<F>(
    apply: F,
    rhs: &Array1<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Array1<f64>, SolveFailure>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok(Array1::zeros(n));
    }
    let target = tol * rhs_norm;
    let mut x = Array1::zeros(n);
    let mut r = rhs.clone();
    let mut p = rhs.clone();
    let mut rr = r.dot(&r);
    for _ in 0..max_iter {
        let mp = apply(&p);
        let curvature = p.dot(&mp);
        if curvature <= 0.0 || !curvature.is_finite() {
            return Err(SolveFailure::NonpositiveCurvature);
        }
        let step = rr / curvature;
        x.scaled_add(step, &p);
        r.scaled_add(-step, &mp);
        let rr_next = r.dot(&r);
        if rr_next.sqrt() <= target {
            return Ok(x);
        }
        let ratio = rr_next / rr;
        rr = rr_next;
        p.mapv_inplace(|v| v * ratio);
        p += &r;
    }
    Err(SolveFailure::NoConvergence)
}

/// Default relative residual tolerance for [`solve_cg`].
pub const CG_TOL: f64 = 1e-10;

/// Default iteration cap factor for [`solve_cg`]: `10 * dim` products.
pub fn cg_max_iter(dim: usize) -> usize {
    10 * dim.max(1)
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, ascending.
pub fn sym_eigenvalues(m: &Array2<f64>) -> Array1<f64> {
    let n = m.nrows();
    assert_eq!(m.ncols(), n, "sym_eigenvalues requires a square matrix");
    if n == 0 {
        return Array1::zeros(0);
    }
    let mut a = m.clone();
    let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if frob == 0.0 {
        return Array1::zeros(n);
    }
    let stop = 1e-13 * frob;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if (2.0 * off).sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= stop / (n as f64) {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("non-finite eigenvalue"));
    Array1::from_vec(eigs)
}
