//! Sparse optimization with Lq-norm regularization.
//!
//! This crate solves composite problems of the form
//!
//! ```text
//!     minimize  f(x) + lambda * sum_i |x_i|^q,      0 <= q < 1,
//! ```
//!
//! where `f` is a smooth loss (least squares, L2-regularized logistic, or
//! squared-hinge SVM). The penalty is nonconvex and nonsmooth; its proximal
//! operator nevertheless has an exact characterization built around two
//! constants: a hard threshold below which inputs map to zero and a minimum
//! magnitude that every surviving entry must exceed. [`prox`] implements that
//! operator, [`solver`] builds two algorithms on top of it (a proximal
//! gradient baseline and a proximal semismooth Newton pursuit that solves
//! restricted Newton systems on the current support), and [`bench`] provides
//! instance generation, LIBSVM-format loading, and benchmark metrics.
//!
//! The crate is pure Rust with no linear-algebra system dependencies; dense
//! kernels use `ndarray` and sparse matrices are compressed sparse row.

pub mod bench;
pub mod linops;
pub mod problems;
pub mod prox;
pub mod solver;

pub use linops::{CsrMatrix, Matrix};
pub use problems::{penalty, ModelKind, Problem};
pub use prox::{ProxConstants, ProxSpec, TieBreak};
pub use solver::{
    prox_grad, psnp, second_order_check, stationarity_residual, support_of, NewtonMode,
    SolveOptions, SolveReport, SolveStatus,
};
