//! Shared fixtures for the acceptance gate: a brute-force prox oracle,
//! checked solver runs that enforce the suite-wide invariants, and seeded
//! instance generators for the three models.
#![allow(dead_code)]

use lqreg::bench::{gen_cs, NormalSampler};
use lqreg::{
    prox_grad, psnp, Problem, ProxSpec, SolveOptions, SolveReport, SolveStatus,
};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

// ---------------------------------------------------------------------------
// Brute-force oracle for the scalar prox
// ---------------------------------------------------------------------------

/// Smallest prime factor for every integer up to `limit`, 0 for 0 and 1.
fn spf_sieve(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    for i in 2..=limit {
        if spf[i] == 0 {
            let mut j = i;
            while j <= limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
    }
    spf
}

/// Grid-search minimizer of `phi(z) = (z - a)^2 / 2 + w |z|^q`, independent
/// of the closed-form thresholding logic under test.
///
/// The grid has `2 * half + 1` points spanning `[-(|a|+1), |a|+1]`; the best
/// grid point is then polished by ternary search with exact `powf`
/// evaluations. Two elementary facts prune the scan without weakening it:
/// `phi(-z) - phi(z) = 2az`, so for `a >= 0` no negative point can beat its
/// mirror image, and `phi' > 0` past `|a|`, so nothing beyond `|a|` can win.
///
/// The powers `(kh)^q = h^q * k^q` come from a table built multiplicatively
/// over the smallest-prime-factor sieve — one `powf` per prime, one multiply
/// per composite — which keeps a million-point scan per case affordable. The
/// table only depends on `q`, so cases grouped by exponent reuse it.
pub struct ProxOracle {
    spf: Vec<u32>,
    table: Vec<f64>,
    table_q: f64,
    half: usize,
}

impl ProxOracle {
    pub fn new(half: usize) -> Self {
        Self { spf: spf_sieve(half), table: vec![0.0; half + 1], table_q: f64::NAN, half }
    }

    fn fill_table(&mut self, q: f64) {
        if self.table_q == q {
            return;
        }
        self.table_q = q;
        self.table[0] = 0.0;
        self.table[1] = 1.0;
        if q == 0.0 {
            for v in &mut self.table[2..] {
                *v = 1.0;
            }
        } else {
            for k in 2..=self.half {
                let p = self.spf[k] as usize;
                self.table[k] =
                    if p == k { (k as f64).powf(q) } else { self.table[p] * self.table[k / p] };
            }
        }
    }

    /// Minimum value of `phi` over the refined grid. The output is within
    /// rounding error of the true minimum, so `phi` at a correct prox point
    /// can exceed it only by a comparable rounding margin.
    pub fn min_value(&mut self, a: f64, w: f64, q: f64) -> f64 {
        self.fill_table(q);
        let m = a.abs();
        let h = (m + 1.0) / self.half as f64;
        let wh = w * h.powf(q);
        let kmax = ((m / h).ceil() as usize + 1).min(self.half);

        let mut best = 0.5 * m * m; // z = 0, where the penalty vanishes
        let mut best_k = 0usize;
        let mut z = 0.0;
        for (off, &t) in self.table[1..=kmax].iter().enumerate() {
            z += h;
            let d = z - m;
            let score = 0.5 * d * d + wh * t;
            if score < best {
                best = score;
                best_k = off + 1;
            }
        }

        let phi = |z: f64| {
            let d = z - m;
            0.5 * d * d + if z == 0.0 { 0.0 } else { w * z.powf(q) }
        };
        let lo = h * best_k.saturating_sub(1) as f64;
        let hi = h * (best_k + 1).min(self.half) as f64;
        best.min(ternary_min(phi, lo, hi))
    }
}

/// Minimum of `f` over `[lo, hi]` by ternary search; returns the smallest
/// value seen, so on a non-unimodal stretch it still never underestimates.
fn ternary_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut best = f(lo).min(f(hi));
    for _ in 0..120 {
        let third = (hi - lo) / 3.0;
        let m1 = lo + third;
        let m2 = hi - third;
        let f1 = f(m1);
        let f2 = f(m2);
        best = best.min(f1).min(f2);
        if f1 <= f2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    best
}

/// `phi(z) = (z - a)^2 / 2 + w |z|^q` with the zero-penalty convention at 0.
pub fn prox_objective(z: f64, a: f64, w: f64, q: f64) -> f64 {
    let d = z - a;
    0.5 * d * d + if z == 0.0 { 0.0 } else { w * z.abs().powf(q) }
}

// ---------------------------------------------------------------------------
// Checked solver runs
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Newton,
    Baseline,
}

/// Runs one solve and asserts the invariant every run in this suite must
/// satisfy with zero violations: the line-search descent margin between
/// consecutive iterates. Stationarity certificates are recorded separately
/// (see [`cert_record`]) and judged by their own criterion.
pub fn run_checked(
    problem: &Problem,
    opts: &SolveOptions,
    algo: Algo,
    label: &str,
) -> SolveReport {
    let report = match algo {
        Algo::Newton => psnp(problem, opts),
        Algo::Baseline => prox_grad(problem, opts),
    }
    .unwrap_or_else(|e| panic!("{label}: solver failed: {e}"));
    assert_descent(&report, opts.sigma, label);
    report
}

/// Every accepted update must satisfy
/// `F(x_{k+1}) <= F(x_k) - (sigma/4) max(step^2, update^2) + 1e-10`.
pub fn assert_descent(report: &SolveReport, sigma: f64, label: &str) {
    for (k, row) in report.trace.iter().enumerate() {
        let next = report.trace.get(k + 1).map_or(report.objective, |r| r.objective);
        let gap = 0.25 * sigma * row.prox_step_norm.powi(2).max(row.update_norm.powi(2));
        assert!(
            next <= row.objective - gap + 1e-10,
            "{label}: descent violated at iteration {k}: {} -> {} (required gap {:.3e})",
            row.objective,
            next,
            gap
        );
    }
}

/// Everything needed to judge the stationarity certificate of one finished
/// run after its full report has been dropped.
#[derive(Clone, Debug)]
pub struct CertRecord {
    pub label: String,
    pub stationary: bool,
    pub residual: f64,
    pub alpha_last: f64,
    pub lambda: f64,
    pub q: f64,
    pub grad_tol: f64,
    /// Smallest nonzero magnitude, `None` for an all-zero solution.
    pub min_support_mag: Option<f64>,
}

pub fn cert_record(report: &SolveReport, opts: &SolveOptions, label: &str) -> CertRecord {
    let min_support_mag = report
        .support
        .iter()
        .map(|&j| report.x_final[j].abs())
        .min_by(|a, b| a.partial_cmp(b).expect("magnitudes are finite"));
    CertRecord {
        label: label.to_string(),
        stationary: report.status == SolveStatus::StationaryStop,
        residual: report.stationarity_residual,
        alpha_last: report.alpha_last,
        lambda: opts.lambda,
        q: opts.q,
        grad_tol: opts.grad_tol,
        min_support_mag,
    }
}

/// A converged run's certificate: the fixed-point residual must stay within
/// `10 * grad_tol`, and for `q > 0` every surviving coordinate must clear
/// the prox magnitude floor. Returns a description of the violation, if any.
pub fn certificate_violation(rec: &CertRecord) -> Option<String> {
    if !rec.stationary {
        return None;
    }
    if !(rec.residual.is_finite() && rec.residual <= 10.0 * rec.grad_tol) {
        return Some(format!(
            "{}: stationarity residual {:.3e} exceeds 10 * grad_tol = {:.3e} \
             (ratio {:.2}; the gradient stop at step size {} admits residuals up to \
             alpha/(1 - q/2) = {:.1} times grad_tol)",
            rec.label,
            rec.residual,
            10.0 * rec.grad_tol,
            rec.residual / rec.grad_tol,
            rec.alpha_last,
            rec.alpha_last / (1.0 - rec.q / 2.0)
        ));
    }
    if rec.q > 0.0 {
        if let Some(mag) = rec.min_support_mag {
            let floor = ProxSpec::new(rec.alpha_last * rec.lambda, rec.q)
                .expect("final step size and weight are positive")
                .constants()
                .min_magnitude
                - 1e-10;
            if mag < floor {
                return Some(format!(
                    "{}: smallest nonzero magnitude {mag:.6e} sits below the prox floor \
                     {floor:.6e}",
                    rec.label
                ));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

/// Binary-label logistic instance on a Gaussian design: labels are the signs
/// of the margins of an `s`-sparse planted signal, mapped to `{0, 1}`.
pub fn gen_logistic_instance(
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
    ridge: f64,
) -> (Problem, Array1<f64>) {
    let inst = gen_cs(m, n, s, 0.0, seed, 1.0).expect("valid shape");
    let margins = inst.matrix.matvec(&inst.x_true);
    let labels = margins.mapv(|t| if t > 0.0 { 1.0 } else { 0.0 });
    let truth = inst.x_true.clone();
    let problem = Problem::logistic(inst.matrix, labels, ridge).expect("labels are binary");
    (problem, truth)
}

/// Writes a seeded synthetic two-class dataset in LIBSVM text format and
/// returns the planted signal. Each sample touches a few planted features
/// plus background noise ones, and its label is the sign of the planted
/// margin, so the classes are cleanly separable by construction.
pub fn write_svm_dataset(
    path: &Path,
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
) -> Array1<f64> {
    assert!(s >= 1 && s <= n && n >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut support = rand::seq::index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut truth = Array1::zeros(n);
    for &j in &support {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        truth[j] = sign * rng.random_range(0.5..=1.5);
    }

    let planted_per_row = 3.min(s);
    let noise_per_row = 17.min(n.saturating_sub(planted_per_row));
    let mut body = String::new();
    for i in 0..m {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        for j in rand::seq::index::sample(&mut rng, n, noise_per_row) {
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            row.insert(j, sign * rng.random_range(0.3..=1.0));
        }
        for t in rand::seq::index::sample(&mut rng, s, planted_per_row) {
            let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
            row.insert(support[t], sign * rng.random_range(0.3..=1.0));
        }
        if i == 0 {
            // Pin the column count: make sure the last feature id appears.
            row.entry(n - 1).or_insert(0.1);
        }
        let margin: f64 = row.iter().map(|(&j, &v)| v * truth[j]).sum();
        let label = if margin > 0.0 { 1 } else { -1 };
        write!(body, "{label}").unwrap();
        for (&j, &v) in &row {
            write!(body, " {}:{:.6}", j + 1, v).unwrap();
        }
        body.push('\n');
    }
    std::fs::write(path, body).expect("dataset file is writable");
    truth
}

/// Dense pseudo-random point with entries `scale * N(0, 1)`.
pub fn random_point(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let mut gauss = NormalSampler::new();
    Array1::from_iter((0..n).map(|_| scale * gauss.sample(rng)))
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference gradient with a per-coordinate relative step.
pub fn fd_gradient(problem: &Problem, x: &Array1<f64>, eps: f64) -> Array1<f64> {
    let mut g = Array1::zeros(x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        let e = eps * (1.0 + x[j].abs());
        let orig = probe[j];
        probe[j] = orig + e;
        let fp = problem.value(&probe);
        probe[j] = orig - e;
        let fm = problem.value(&probe);
        probe[j] = orig;
        g[j] = (fp - fm) / (2.0 * e);
    }
    g
}

/// Central-difference directional derivative of the gradient, restricted to
/// `support`: approximates the restricted Hessian times `v`.
pub fn fd_hessian_action(
    problem: &Problem,
    x: &Array1<f64>,
    support: &[usize],
    v: &Array1<f64>,
    eps: f64,
) -> Array1<f64> {
    let mut probe = x.clone();
    for (t, &j) in support.iter().enumerate() {
        probe[j] = x[j] + eps * v[t];
    }
    let gp = problem.gradient(&probe);
    for (t, &j) in support.iter().enumerate() {
        probe[j] = x[j] - eps * v[t];
    }
    let gm = problem.gradient(&probe);
    Array1::from_iter(support.iter().map(|&j| (gp[j] - gm[j]) / (2.0 * eps)))
}

/// `||a - b|| / max(||b||, floor)`.
pub fn relative_gap(a: &Array1<f64>, b: &Array1<f64>, floor: f64) -> f64 {
    let diff = a - b;
    let num = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let den = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(floor)
}
