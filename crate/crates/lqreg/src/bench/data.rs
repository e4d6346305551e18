//! Synthetic compressed-sensing instance generation.

use super::BenchError;
use crate::linops::{CsrMatrix, Matrix};
use crate::problems::Problem;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal sampler over any uniform RNG, using the Marsaglia polar
/// method with the spare deviate cached. Keeping the transform in-house
/// pins the exact draw sequence, so seeded instances are reproducible
/// bit-for-bit regardless of distribution-crate versions.
#[derive(Debug, Default)]
pub struct NormalSampler {
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            let v = 2.0 * rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// A generated sparse-recovery instance: `response = matrix * x_true + noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsInstance {
    /// Gaussian sample matrix with unit-norm columns.
    pub matrix: Matrix,
    pub response: Array1<f64>,
    /// Ground-truth signal: `sparsity` nonzeros with magnitudes in
    /// `[0.5, 1.5]` and random signs.
    pub x_true: Array1<f64>,
    pub sparsity: usize,
    pub noise_factor: f64,
    pub seed: u64,
    pub density: f64,
}

impl CsInstance {
    /// The least-squares problem `min ||matrix x - response||^2 / 2`.
    pub fn to_problem(&self) -> Problem {
        Problem::least_squares(self.matrix.clone(), self.response.clone())
            .expect("instance shapes are consistent by construction")
    }
}

/// Generates an `m x n` instance with an `s`-sparse ground truth and noise
/// scale `nf`. `density` is the expected fraction of nonzero matrix entries;
/// `1.0` produces dense storage, anything lower produces sparse storage with
/// each entry kept independently (columns that come out empty are redrawn).
///
/// Deterministic given `seed`: the draw order is fixed as matrix columns,
/// then support indices, then signal values, then noise.
pub fn gen_cs(
    m: usize,
    n: usize,
    s: usize,
    nf: f64,
    seed: u64,
    density: f64,
) -> Result<CsInstance, BenchError> {
    if m == 0 || n == 0 {
        return Err(BenchError::BadShape { m, n });
    }
    if s == 0 || s > n {
        return Err(BenchError::BadSparsity { s, n });
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(BenchError::BadDensity(density));
    }
    if !(nf >= 0.0 && nf.is_finite()) {
        return Err(BenchError::BadNoise(nf));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = NormalSampler::new();

    let mut matrix = if density >= 1.0 {
        let mut a = ndarray::Array2::zeros((m, n));
        for j in 0..n {
            loop {
                let mut sumsq = 0.0;
                for i in 0..m {
                    let v = gauss.sample(&mut rng);
                    a[[i, j]] = v;
                    sumsq += v * v;
                }
                if sumsq > 0.0 {
                    break;
                }
            }
        }
        Matrix::Dense(a)
    } else {
        let mut cols: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        for _ in 0..n {
            let col = loop {
                let mut col = Vec::new();
                for i in 0..m {
                    if rng.random::<f64>() < density {
                        col.push((i, gauss.sample(&mut rng)));
                    }
                }
                if col.iter().any(|&(_, v)| v != 0.0) {
                    break col;
                }
            };
            cols.push(col);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                rows[i].push((j, v));
            }
        }
        Matrix::Sparse(CsrMatrix::from_rows(n, &rows).expect("rows are built column-sorted"))
    };

    let inverse_norms = matrix.col_norms_sq().mapv(|v| 1.0 / v.sqrt());
    matrix.scale_columns(&inverse_norms);

    let mut support = rand::seq::index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut x_true = Array1::zeros(n);
    for &j in &support {
        let magnitude = rng.random_range(0.5..=1.5);
        x_true[j] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }

    let mut response = matrix.matvec(&x_true);
    if nf > 0.0 {
        for r in response.iter_mut() {
            *r += nf * gauss.sample(&mut rng);
        }
    }

    Ok(CsInstance { matrix, response, x_true, sparsity: s, noise_factor: nf, seed, density })
}
