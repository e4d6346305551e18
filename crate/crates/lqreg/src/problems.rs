//! Smooth objective models: least squares, L2-regularized logistic loss, and
//! squared-hinge SVM.
//!
//! A [`Problem`] owns the sample matrix and response and evaluates the smooth
//! part `f` of the composite objective `f(x) + lambda * ||x||_q^q`: values,
//! gradients, and Hessian blocks restricted to a support set. All three
//! models share one restricted-Hessian shape,
//! `A[:, S]^T diag(row weights) A[:, S] + ridge * I`, which
//! [`RestrictedHessian`] exposes both as a matrix-free operator and as an
//! explicit dense block. [`NewtonSystem`] adds the penalty curvature
//! `lambda * q * (q - 1) * |w_i|^(q-2)` on the diagonal — nonpositive for
//! `q` in `(0, 1)`, zero for `q = 0`.
//!
//! Problems are immutable after construction; every method takes `&self`.

use crate::linops::{ColumnSet, Matrix};
use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("response length {response} does not match {rows} samples")]
    ResponseLength { response: usize, rows: usize },
    #[error("sample {index}: logistic labels must be 0 or 1, got {value}")]
    BadLogisticLabel { index: usize, value: f64 },
    #[error("sample {index}: SVM labels must be -1 or +1, got {value}")]
    BadSvmLabel { index: usize, value: f64 },
    #[error("ridge coefficient must be positive and finite, got {0}")]
    BadRidge(f64),
    #[error("vector length {got} does not match {expected} variables")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("support index {index} is zero in the iterate; penalty gradient undefined there")]
    ZeroOnSupport { index: usize },
    #[error("penalty weight must be positive and finite, got {0}")]
    BadPenaltyWeight(f64),
    #[error("penalty exponent must lie in [0, 1), got {0}")]
    BadPenaltyExponent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `f(x) = ||A x - b||^2 / 2`.
    LeastSquares,
    /// `f(x) = mean_i [ ln(1 + exp(<a_i, x>)) - b_i <a_i, x> ] + ridge/2 ||x||^2`,
    /// labels in `{0, 1}`.
    LogisticL2,
    /// `f(x) = 1/(2m) sum_i max(1 - y_i <a_i, x>, 0)^2 + ridge/2 ||x||^2`,
    /// labels in `{-1, +1}`.
    SquaredHingeSvm,
}

/// A smooth objective over a fixed sample matrix and response vector.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: ModelKind,
    data: Matrix,
    response: Array1<f64>,
    ridge: f64,
}

impl Problem {
    pub fn least_squares(data: Matrix, response: Array1<f64>) -> Result<Self, ProblemError> {
        check_response(&data, &response)?;
        Ok(Self { kind: ModelKind::LeastSquares, data, response, ridge: 0.0 })
    }

    pub fn logistic(data: Matrix, labels: Array1<f64>, ridge: f64) -> Result<Self, ProblemError> {
        check_response(&data, &labels)?;
        check_ridge(ridge)?;
        for (index, &value) in labels.iter().enumerate() {
            if value != 0.0 && value != 1.0 {
                return Err(ProblemError::BadLogisticLabel { index, value });
            }
        }
        Ok(Self { kind: ModelKind::LogisticL2, data, response: labels, ridge })
    }

    pub fn squared_hinge(
        data: Matrix,
        labels: Array1<f64>,
        ridge: f64,
    ) -> Result<Self, ProblemError> {
        check_response(&data, &labels)?;
        check_ridge(ridge)?;
        for (index, &value) in labels.iter().enumerate() {
            if value != -1.0 && value != 1.0 {
                return Err(ProblemError::BadSvmLabel { index, value });
            }
        }
        Ok(Self { kind: ModelKind::SquaredHingeSvm, data, response: labels, ridge })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn response(&self) -> &Array1<f64> {
        &self.response
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn nsamples(&self) -> usize {
        self.data.nrows()
    }

    pub fn nvars(&self) -> usize {
        self.data.ncols()
    }

    fn check_x(&self, x: &Array1<f64>) -> Result<(), ProblemError> {
        if x.len() != self.nvars() {
            return Err(ProblemError::DimensionMismatch { got: x.len(), expected: self.nvars() });
        }
        Ok(())
    }

    /// Smooth objective value `f(x)`.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        self.check_x(x).expect("value: dimension mismatch");
        let t = self.data.matvec(x);
        let m = self.nsamples() as f64;
        match self.kind {
            ModelKind::LeastSquares => {
                let mut acc = 0.0;
                for (&ti, &bi) in t.iter().zip(self.response.iter()) {
                    let r = ti - bi;
                    acc += r * r;
                }
                0.5 * acc
            }
            ModelKind::LogisticL2 => {
                let mut acc = 0.0;
                for (&ti, &bi) in t.iter().zip(self.response.iter()) {
                    acc += softplus(ti) - bi * ti;
                }
                acc / m + 0.5 * self.ridge * x.dot(x)
            }
            ModelKind::SquaredHingeSvm => {
                let mut acc = 0.0;
                for (&ti, &yi) in t.iter().zip(self.response.iter()) {
                    let margin = 1.0 - yi * ti;
                    if margin > 0.0 {
                        acc += margin * margin;
                    }
                }
                acc / (2.0 * m) + 0.5 * self.ridge * x.dot(x)
            }
        }
    }

    /// Per-sample loss derivative with respect to the margin `<a_i, x>`; the
    /// full gradient is `A^T dual + ridge * x`.
    fn dual(&self, x: &Array1<f64>) -> Array1<f64> {
        let t = self.data.matvec(x);
        let m = self.nsamples() as f64;
        match self.kind {
            ModelKind::LeastSquares => &t - &self.response,
            ModelKind::LogisticL2 => {
                let mut out = t;
                for (o, &bi) in out.iter_mut().zip(self.response.iter()) {
                    *o = (sigmoid(*o) - bi) / m;
                }
                out
            }
            ModelKind::SquaredHingeSvm => {
                let mut out = t;
                for (o, &yi) in out.iter_mut().zip(self.response.iter()) {
                    let margin = 1.0 - yi * *o;
                    *o = if margin > 0.0 { -yi * margin / m } else { 0.0 };
                }
                out
            }
        }
    }

    /// Gradient of the smooth objective.
    pub fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.check_x(x).expect("gradient: dimension mismatch");
        let mut g = self.data.matvec_t(&self.dual(x));
        if self.ridge != 0.0 {
            g.scaled_add(self.ridge, x);
        }
        g
    }

    /// Row weights of the Hessian `A^T diag(w) A + ridge I` at `x`; `None`
    /// means all ones (least squares).
    fn hessian_weights(&self, x: &Array1<f64>) -> Option<Array1<f64>> {
        let m = self.nsamples() as f64;
        match self.kind {
            ModelKind::LeastSquares => None,
            ModelKind::LogisticL2 => {
                let t = self.data.matvec(x);
                Some(t.mapv(|ti| {
                    let p = sigmoid(ti);
                    p * (1.0 - p) / m
                }))
            }
            ModelKind::SquaredHingeSvm => {
                // A sample enters the Hessian only while its margin is
                // strictly violated; the boundary itself carries no curvature.
                let t = self.data.matvec(x);
                let mut w = Array1::zeros(t.len());
                for (wi, (&ti, &yi)) in w.iter_mut().zip(t.iter().zip(self.response.iter())) {
                    if 1.0 - yi * ti > 0.0 {
                        *wi = 1.0 / m;
                    }
                }
                Some(w)
            }
        }
    }

    /// Hessian of `f` at `x` restricted to the rows/columns in `support`.
    pub fn restricted_hessian(&self, x: &Array1<f64>, support: &[usize]) -> RestrictedHessian<'_> {
        self.check_x(x).expect("restricted_hessian: dimension mismatch");
        RestrictedHessian {
            mat: &self.data,
            set: ColumnSet::new(self.nvars(), support),
            row_weights: self.hessian_weights(x),
            ridge: self.ridge,
        }
    }

    /// `f(x) + lambda * ||x||_q^q`.
    pub fn penalized_value(&self, x: &Array1<f64>, lambda: f64, q: f64) -> f64 {
        self.value(x) + penalty(x, lambda, q)
    }

    /// Gradient of `f(w) + lambda * ||w||_q^q` over the coordinates in
    /// `support`, in support order. Every supported coordinate must be
    /// nonzero when `q > 0`; for `q = 0` the penalty is locally constant and
    /// contributes nothing.
    pub fn restricted_penalized_gradient(
        &self,
        w: &Array1<f64>,
        support: &[usize],
        lambda: f64,
        q: f64,
    ) -> Result<Array1<f64>, ProblemError> {
        self.check_x(w)?;
        check_penalty(lambda, q)?;
        let set = ColumnSet::new(self.nvars(), support);
        let mut g = self.data.cols_dot(&set, &self.dual(w));
        for (p, &j) in support.iter().enumerate() {
            let wj = w[j];
            if self.ridge != 0.0 {
                g[p] += self.ridge * wj;
            }
            if q > 0.0 {
                if wj == 0.0 {
                    return Err(ProblemError::ZeroOnSupport { index: j });
                }
                g[p] += lambda * q * wj.signum() * wj.abs().powf(q - 1.0);
            }
        }
        Ok(g)
    }

    /// Restricted Hessian of the penalized objective at `w`: the smooth
    /// Hessian block plus the penalty curvature on the diagonal.
    pub fn newton_system(
        &self,
        w: &Array1<f64>,
        support: &[usize],
        lambda: f64,
        q: f64,
    ) -> Result<NewtonSystem<'_>, ProblemError> {
        self.check_x(w)?;
        check_penalty(lambda, q)?;
        let mut shift = Array1::zeros(support.len());
        if q > 0.0 {
            for (s, &j) in shift.iter_mut().zip(support.iter()) {
                let wj: f64 = w[j];
                if wj == 0.0 {
                    return Err(ProblemError::ZeroOnSupport { index: j });
                }
                *s = lambda * q * (q - 1.0) * wj.abs().powf(q - 2.0);
            }
        }
        Ok(NewtonSystem { hessian: self.restricted_hessian(w, support), shift })
    }
}

fn check_response(data: &Matrix, response: &Array1<f64>) -> Result<(), ProblemError> {
    if response.len() != data.nrows() {
        return Err(ProblemError::ResponseLength { response: response.len(), rows: data.nrows() });
    }
    Ok(())
}

fn check_ridge(ridge: f64) -> Result<(), ProblemError> {
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(ProblemError::BadRidge(ridge));
    }
    Ok(())
}

fn check_penalty(lambda: f64, q: f64) -> Result<(), ProblemError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ProblemError::BadPenaltyWeight(lambda));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(ProblemError::BadPenaltyExponent(q));
    }
    Ok(())
}

/// `lambda * sum_i |x_i|^q` with the `0^0 := 0` convention: for `q = 0` this
/// is `lambda` times the number of nonzero entries.
pub fn penalty(x: &Array1<f64>, lambda: f64, q: f64) -> f64 {
    let mut acc = 0.0;
    if q == 0.0 {
        for &v in x.iter() {
            if v != 0.0 {
                acc += 1.0;
            }
        }
    } else {
        for &v in x.iter() {
            if v != 0.0 {
                acc += v.abs().powf(q);
            }
        }
    }
    lambda * acc
}

/// `A[:, S]^T diag(w) A[:, S] + ridge I`, usable matrix-free or materialized.
#[derive(Debug)]
pub struct RestrictedHessian<'a> {
    mat: &'a Matrix,
    set: ColumnSet,
    row_weights: Option<Array1<f64>>,
    ridge: f64,
}

impl RestrictedHessian<'_> {
    pub fn dim(&self) -> usize {
        self.set.len()
    }

    pub fn support(&self) -> &[usize] {
        self.set.cols()
    }

    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let mut u = self.mat.matvec_cols(&self.set, v);
        if let Some(w) = &self.row_weights {
            u *= w;
        }
        let mut out = self.mat.cols_dot(&self.set, &u);
        if self.ridge != 0.0 {
            out.scaled_add(self.ridge, v);
        }
        out
    }

    pub fn materialize(&self) -> Array2<f64> {
        let mut g = self.mat.weighted_gram(&self.set, self.row_weights.as_ref());
        if self.ridge != 0.0 {
            for i in 0..g.nrows() {
                g[[i, i]] += self.ridge;
            }
        }
        g
    }
}

/// Restricted Hessian of the penalized objective: smooth block plus a
/// diagonal curvature shift from the penalty.
#[derive(Debug)]
pub struct NewtonSystem<'a> {
    hessian: RestrictedHessian<'a>,
    shift: Array1<f64>,
}

impl NewtonSystem<'_> {
    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn support(&self) -> &[usize] {
        self.hessian.support()
    }

    pub fn smooth_part(&self) -> &RestrictedHessian<'_> {
        &self.hessian
    }

    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let mut out = self.hessian.apply(v);
        for ((o, &s), &vi) in out.iter_mut().zip(self.shift.iter()).zip(v.iter()) {
            *o += s * vi;
        }
        out
    }

    pub fn materialize(&self) -> Array2<f64> {
        let mut m = self.hessian.materialize();
        for (i, &s) in self.shift.iter().enumerate() {
            m[[i, i]] += s;
        }
        m
    }
}

/// Numerically stable `ln(1 + exp(t))`.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
