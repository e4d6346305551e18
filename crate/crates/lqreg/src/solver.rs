//! Solvers for `min F(x) = f(x) + lambda * ||x||_q^q`.
//!
//! [`psnp`] runs a three-phase iteration: an Armijo-controlled proximal
//! descent step, support detection on its output, and a Newton step on the
//! detected support with its own backtracking line search. When the Newton
//! system cannot be solved or its line search fails, the iteration falls
//! back to the proximal point, so a step is always taken. [`prox_grad`] is
//! the same driver with the Newton phase disabled — it is the classical
//! proximal-gradient family (hard thresholding at `q = 0`, half thresholding
//! at `q = 1/2`, and so on), and `psnp` with [`NewtonMode::Off`] is bitwise
//! identical to it.
//!
//! Both report full per-iteration telemetry in [`SolveReport::trace`];
//! [`stationarity_residual`] and [`second_order_check`] provide independent
//! after-the-fact diagnostics of a candidate solution.

use crate::linops::{self, norm2, SolveFailure};
use crate::problems::Problem;
use crate::prox::{lambda_upper_bound, ProxSpec};
use ndarray::Array1;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("option {name} is out of range: {value}")]
    BadOption { name: &'static str, value: f64 },
    #[error("starting point has {got} entries, problem has {expected} variables")]
    StartLength { got: usize, expected: usize },
    #[error("second-order check requires a nonzero point")]
    ZeroPoint,
}

/// How the restricted Newton system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NewtonMode {
    /// Direct factorization when the support is small (at most
    /// [`DENSE_NEWTON_LIMIT`] columns), conjugate gradient otherwise.
    #[default]
    Auto,
    Direct,
    Cg,
    /// Skip the Newton phase entirely; every iteration takes the proximal
    /// point. Makes [`psnp`] coincide with [`prox_grad`].
    Off,
}

/// Support size above which [`NewtonMode::Auto`] switches from a direct
/// factorization to conjugate gradient.
pub const DENSE_NEWTON_LIMIT: usize = 500;

/// Configuration for [`psnp`] and [`prox_grad`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Penalty weight, positive.
    pub lambda: f64,
    /// Penalty exponent in `[0, 1)`.
    pub q: f64,
    /// Sufficient-decrease coefficient for both line searches.
    pub sigma: f64,
    /// Initial trial step for the proximal line search. `1` suits
    /// least-squares objectives; `10` works better for the SVM model, whose
    /// per-sample averaging makes curvature small.
    pub tau: f64,
    /// Backtracking factor in `(0, 1)` shared by both line searches.
    pub gamma: f64,
    /// Stationarity tolerance on the on-support gradient norm.
    pub grad_tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Trial cap per line search (trials `0..=max_backtracks`).
    pub max_backtracks: usize,
    pub newton_mode: NewtonMode,
    /// Starting point; `None` means the origin.
    pub x0: Option<Array1<f64>>,
}

impl SolveOptions {
    pub fn new(lambda: f64, q: f64) -> Self {
        Self {
            lambda,
            q,
            sigma: 1e-4,
            tau: 1.0,
            gamma: 0.5,
            grad_tol: 1e-6,
            max_iter: 10_000,
            max_backtracks: 50,
            newton_mode: NewtonMode::Auto,
            x0: None,
        }
    }

    fn validate(&self, nvars: usize) -> Result<(), SolverError> {
        let checks: [(&'static str, f64, bool); 6] = [
            ("lambda", self.lambda, self.lambda > 0.0 && self.lambda.is_finite()),
            ("q", self.q, (0.0..1.0).contains(&self.q)),
            ("sigma", self.sigma, self.sigma > 0.0 && self.sigma.is_finite()),
            ("tau", self.tau, self.tau > 0.0 && self.tau.is_finite()),
            ("gamma", self.gamma, self.gamma > 0.0 && self.gamma < 1.0),
            ("grad_tol", self.grad_tol, self.grad_tol > 0.0 && self.grad_tol.is_finite()),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(SolverError::BadOption { name, value });
            }
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != nvars {
                return Err(SolverError::StartLength { got: x0.len(), expected: nvars });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// The support stopped changing and the on-support gradient norm fell
    /// below `grad_tol`.
    StationaryStop,
    MaxIter,
    /// The proximal line search could not find a nonincreasing step.
    LineSearchStall,
    /// A non-finite objective value was encountered.
    NumericFailure,
}

/// One completed iteration. All state fields describe the iterate at the
/// start of the iteration; the step fields describe what the iteration did.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    /// Penalized objective at the incoming iterate.
    pub objective: f64,
    /// On-support penalized gradient norm at the incoming iterate
    /// (infinity when a supported coordinate is exactly zero with `q > 0`).
    pub grad_inf: f64,
    /// Support carried into the iteration.
    pub support: Vec<usize>,
    /// Whether the proximal point's support equals the incoming support —
    /// the first half of the stopping test.
    pub support_unchanged: bool,
    /// Accepted proximal step size.
    pub alpha: f64,
    /// Newton step length, when the Newton step was accepted.
    pub beta: Option<f64>,
    pub newton_accepted: bool,
    /// Euclidean distance from the iterate to its proximal point.
    pub prox_step_norm: f64,
    /// Euclidean distance from the iterate to the next iterate.
    pub update_norm: f64,
    /// Seconds since the solve started.
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_final: Array1<f64>,
    /// Indices of the nonzero entries of `x_final`.
    pub support: Vec<usize>,
    /// Penalized objective at `x_final`.
    pub objective: f64,
    /// Smooth part of the objective at `x_final`.
    pub f_value: f64,
    /// Completed iterations (equals `trace.len()`).
    pub iterations: usize,
    pub status: SolveStatus,
    /// On-support penalized gradient norm at `x_final`.
    pub grad_inf: f64,
    /// `||x - prox(x - alpha grad f(x))||_inf` at `x_final` with the last
    /// accepted step size.
    pub stationarity_residual: f64,
    /// Last accepted proximal step size.
    pub alpha_last: f64,
    pub trace: Vec<IterationRecord>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

/// Indices of nonzero entries, ascending.
pub fn support_of(x: &Array1<f64>) -> Vec<usize> {
    x.iter().enumerate().filter(|&(_, &v)| v != 0.0).map(|(i, _)| i).collect()
}

/// Proximal semismooth Newton pursuit.
pub fn psnp(problem: &Problem, opts: &SolveOptions) -> Result<SolveReport, SolverError> {
    drive(problem, opts, opts.newton_mode)
}

/// Proximal gradient descent with the same Armijo rule and stopping tests
/// as [`psnp`].
pub fn prox_grad(problem: &Problem, opts: &SolveOptions) -> Result<SolveReport, SolverError> {
    drive(problem, opts, NewtonMode::Off)
}

fn drive(
    problem: &Problem,
    opts: &SolveOptions,
    newton_mode: NewtonMode,
) -> Result<SolveReport, SolverError> {
    opts.validate(problem.nvars())?;
    let start = Instant::now();
    let n = problem.nvars();
    let (lambda, q, sigma) = (opts.lambda, opts.q, opts.sigma);

    let mut warnings = Vec::new();
    match lambda_upper_bound(&problem.gradient(&Array1::zeros(n)), opts.tau, q) {
        Ok(bound) if lambda >= bound => {
            warnings.push(format!(
                "lambda = {lambda:.6e} is at or above the zero-solution bound {bound:.6e}; \
                 the origin may be the only stationary point found"
            ));
        }
        _ => {}
    }

    let mut x = opts.x0.clone().unwrap_or_else(|| Array1::zeros(n));
    let mut fx = problem.penalized_value(&x, lambda, q);
    // Support of the proximal point from the previous iteration (the support
    // of the starting point before any iteration has run).
    let mut support_prev = support_of(&x);
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut alpha_last = opts.tau;
    let mut grad_inf_final = f64::NAN;
    let mut armijo_cap_warned = false;

    if !fx.is_finite() {
        status = SolveStatus::NumericFailure;
    } else {
        for k in 0..opts.max_iter {
            let g = problem.gradient(&x);
            let grad_here = support_grad_inf(&g, &x, &support_prev, lambda, q);

            // Phase I: proximal descent with backtracking on the step size.
            let mut alpha = opts.tau;
            let mut chosen: Option<(Array1<f64>, f64, f64)> = None;
            let mut last: Option<(Array1<f64>, f64, f64)> = None;
            for _ in 0..=opts.max_backtracks {
                let spec = ProxSpec::new(alpha * lambda, q).expect("options validated");
                let mut u = x.clone();
                u.scaled_add(-alpha, &g);
                let w = match spec.prox_vec(&u) {
                    Ok(w) => w,
                    Err(err) => {
                        warnings.push(format!("iteration {k}: proximal map failed: {err}"));
                        status = SolveStatus::NumericFailure;
                        break;
                    }
                };
                let step = norm2(&(&w - &x));
                let fw = problem.penalized_value(&w, lambda, q);
                if fw <= fx - 0.5 * sigma * step * step {
                    chosen = Some((w, fw, step));
                    break;
                }
                last = Some((w, fw, step));
                alpha *= opts.gamma;
            }
            if status == SolveStatus::NumericFailure {
                grad_inf_final = grad_here;
                break;
            }
            let (w, fw, prox_step_norm) = match chosen {
                Some(hit) => hit,
                None => {
                    // The theory guarantees a satisfying step exists, but at
                    // the numerical floor the best we can ask is no increase.
                    alpha /= opts.gamma; // undo the post-trial decrease
                    let (w, fw, step) = last.expect("at least one trial ran");
                    if fw <= fx {
                        if !armijo_cap_warned {
                            warnings.push(format!(
                                "iteration {k}: proximal line search hit the trial cap; \
                                 accepted a nonincreasing step"
                            ));
                            armijo_cap_warned = true;
                        }
                        (w, fw, step)
                    } else {
                        status = if fw.is_finite() {
                            SolveStatus::LineSearchStall
                        } else {
                            SolveStatus::NumericFailure
                        };
                        grad_inf_final = grad_here;
                        break;
                    }
                }
            };
            alpha_last = alpha;

            // Phase II: the support of the proximal point.
            let support = support_of(&w);
            let support_unchanged = support == support_prev;

            // Stop as soon as the support has stabilized and the incoming
            // iterate is stationary on it; the iterate is returned as-is.
            if support_unchanged && grad_here < opts.grad_tol {
                status = SolveStatus::StationaryStop;
                grad_inf_final = grad_here;
                break;
            }

            // Phase III: Newton step on the detected support. Any failure
            // (unsolvable system, exhausted line search) falls back to the
            // proximal point.
            let mut x_next = w;
            let mut f_next = fw;
            let mut beta_accepted = None;
            if newton_mode != NewtonMode::Off && !support.is_empty() {
                if let Some((step, beta)) = newton_step(
                    problem,
                    &x_next,
                    &support,
                    fw,
                    lambda,
                    q,
                    sigma,
                    opts.gamma,
                    opts.max_backtracks,
                    newton_mode,
                ) {
                    f_next = step.1;
                    x_next = step.0;
                    beta_accepted = Some(beta);
                }
            }

            let update_norm = norm2(&(&x_next - &x));
            trace.push(IterationRecord {
                iter: k,
                objective: fx,
                grad_inf: grad_here,
                support: support_prev,
                support_unchanged,
                alpha,
                beta: beta_accepted,
                newton_accepted: beta_accepted.is_some(),
                prox_step_norm,
                update_norm,
                elapsed: start.elapsed().as_secs_f64(),
            });
            support_prev = support;
            x = x_next;
            fx = f_next;
        }
    }

    if grad_inf_final.is_nan() {
        let g = problem.gradient(&x);
        grad_inf_final = support_grad_inf(&g, &x, &support_prev, lambda, q);
    }
    let stationarity = stationarity_residual(problem, &x, alpha_last, lambda, q);
    let f_value = problem.value(&x);
    Ok(SolveReport {
        support: support_of(&x),
        objective: fx,
        f_value,
        iterations: trace.len(),
        status,
        grad_inf: grad_inf_final,
        stationarity_residual: stationarity,
        alpha_last,
        trace,
        warnings,
        seconds: start.elapsed().as_secs_f64(),
        x_final: x,
    })
}

/// Newton phase: solve the restricted system, backtrack on the step length,
/// and return the new iterate with its objective and the accepted length.
/// `None` means the caller should keep the proximal point.
#[allow(clippy::too_many_arguments)]
fn newton_step(
    problem: &Problem,
    w: &Array1<f64>,
    support: &[usize],
    fw: f64,
    lambda: f64,
    q: f64,
    sigma: f64,
    gamma: f64,
    max_backtracks: usize,
    mode: NewtonMode,
) -> Option<((Array1<f64>, f64), f64)> {
    let rhs = problem.restricted_penalized_gradient(w, support, lambda, q).ok()?;
    let system = problem.newton_system(w, support, lambda, q).ok()?;
    let dim = support.len();
    let use_direct = match mode {
        NewtonMode::Direct => true,
        NewtonMode::Cg => false,
        NewtonMode::Auto => dim <= DENSE_NEWTON_LIMIT,
        NewtonMode::Off => unreachable!("Off is handled by the caller"),
    };
    let direction: Result<Array1<f64>, SolveFailure> = if use_direct {
        linops::solve_direct(&system.materialize(), &rhs)
    } else {
        // The sample-averaged Hessian blocks have rank at most the sample
        // count (plus a diagonal), so Krylov progress beyond ~2m products
        // means the system is effectively singular; give up early and let
        // the proximal fallback absorb the iteration.
        let budget = linops::cg_max_iter(dim).min(2 * problem.nsamples() + 100);
        linops::solve_cg(|v| system.apply(v), &rhs, linops::CG_TOL, budget)
    };
    let d = direction.ok()?;
    let d_norm = norm2(&d);

    let mut beta = 1.0;
    for _ in 0..=max_backtracks {
        let mut x_try = w.clone();
        for (p, &j) in support.iter().enumerate() {
            x_try[j] -= beta * d[p];
        }
        let f_try = problem.penalized_value(&x_try, lambda, q);
        let moved = beta * d_norm;
        if f_try <= fw - 0.5 * sigma * moved * moved {
            return Some(((x_try, f_try), beta));
        }
        beta *= gamma;
    }
    None
}

/// Infinity norm of the penalized gradient over `support` at `x`. Empty
/// supports give 0; a zero coordinate on the support gives infinity when
/// `q > 0` (the penalty gradient is unbounded there).
fn support_grad_inf(
    g_smooth: &Array1<f64>,
    x: &Array1<f64>,
    support: &[usize],
    lambda: f64,
    q: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for &j in support {
        let mut r = g_smooth[j];
        if q > 0.0 {
            let xj = x[j];
            if xj == 0.0 {
                return f64::INFINITY;
            }
            r += lambda * q * xj.signum() * xj.abs().powf(q - 1.0);
        }
        worst = worst.max(r.abs());
    }
    worst
}

/// `||x - prox(x - alpha grad f(x))||_inf`, the fixed-point residual of the
/// proximal-gradient map. Where the proximal map is two-valued (a threshold
/// tie), the distance to the nearest element counts, so a point sitting on
/// either branch has residual zero. Non-finite inputs give NaN.
pub fn stationarity_residual(
    problem: &Problem,
    x: &Array1<f64>,
    alpha: f64,
    lambda: f64,
    q: f64,
) -> f64 {
    let spec = match ProxSpec::new(alpha * lambda, q) {
        Ok(spec) => spec,
        Err(_) => return f64::NAN,
    };
    let g = problem.gradient(x);
    let mut worst = 0.0f64;
    for (&xi, &gi) in x.iter().zip(g.iter()) {
        let u = xi - alpha * gi;
        if !u.is_finite() {
            return f64::NAN;
        }
        let (p0, p1) = spec.prox_set(u).expect("safeguarded scalar prox on finite input");
        let mut dist = (xi - p0).abs();
        if let Some(p1) = p1 {
            dist = dist.min((xi - p1).abs());
        }
        worst = worst.max(dist);
    }
    worst
}

/// Second-order diagnostics at a candidate solution `x`.
#[derive(Debug, Clone)]
pub struct SecondOrderCheck {
    pub support: Vec<usize>,
    /// Smallest eigenvalue of the restricted penalized Hessian.
    pub min_eig_newton: f64,
    /// Smallest eigenvalue of the restricted smooth Hessian.
    pub min_eig_smooth: f64,
    /// Whether the penalized Hessian is positive definite — the sufficient
    /// condition for `x` to be a strict local minimizer.
    pub sufficient: bool,
    /// Whether the smooth curvature clears `q / (2 alpha)`, the margin that
    /// by itself forces `sufficient` at a stationary point with step `alpha`.
    pub curvature_margin: bool,
}

/// Eigenvalue test of the restricted penalized Hessian at `x` (which must be
/// nonzero): positive definiteness certifies a strict local minimizer.
pub fn second_order_check(
    problem: &Problem,
    x: &Array1<f64>,
    lambda: f64,
    q: f64,
    alpha: f64,
) -> Result<SecondOrderCheck, SolverError> {
    let support = support_of(x);
    if support.is_empty() {
        return Err(SolverError::ZeroPoint);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(SolverError::BadOption { name: "alpha", value: alpha });
    }
    let system = problem
        .newton_system(x, &support, lambda, q)
        .expect("support excludes zeros by construction");
    let min_eig_newton = sym_min_eig(&system.materialize());
    let min_eig_smooth = sym_min_eig(&system.smooth_part().materialize());
    Ok(SecondOrderCheck {
        support,
        min_eig_newton,
        min_eig_smooth,
        sufficient: min_eig_newton > 0.0,
        curvature_margin: min_eig_smooth > q / (2.0 * alpha),
    })
}

fn sym_min_eig(m: &ndarray::Array2<f64>) -> f64 {
    let eigs = linops::sym_eigenvalues(m);
    eigs[0]
}
