//! Proximal operator of the scaled Lq penalty `w * |z|^q`, `0 <= q < 1`.
//!
//! For a scalar input `a`, the operator returns a minimizer of
//!
//! ```text
//!     phi(z) = (z - a)^2 / 2 + w * |z|^q        (0^0 := 0)
//! ```
//!
//! The minimizer set has a closed characterization through two constants
//! derived from `(w, q)`:
//!
//! * `threshold`: inputs with `|a|` strictly below it map to zero, inputs
//!   strictly above it map to a single nonzero point, and at `|a| ==
//!   threshold` the set contains both zero and one nonzero point (a genuine
//!   tie; [`TieBreak`] picks the representative).
//! * `min_magnitude`: every nonzero output has magnitude at least this value,
//!   so prox outputs are either exactly zero or bounded away from it.
//!
//! The nonzero branch solves `z - |a| + w*q*z^(q-1) = 0` for `z >=
//! min_magnitude` with a bracketed Newton iteration; on that interval the
//! equation's left side is strictly increasing (slope at least `1 - q/2`), so
//! the root is unique. For `q = 0` the nonzero branch is the identity.

use ndarray::Array1;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProxError {
    #[error("penalty weight must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("penalty exponent must lie in [0, 1), got {0}")]
    InvalidExponent(f64),
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("prox input must be finite, got {0}")]
    NonFiniteInput(f64),
    #[error("nonzero-branch root finder failed for input {input} (weight {weight}, q {q})")]
    RootFinder { input: f64, weight: f64, q: f64 },
    #[error("gradient at the origin is zero; penalty weight ceiling is undefined")]
    ZeroGradient,
}

/// Which representative [`ProxSpec::prox`] returns when the minimizer set has
/// two elements (`|a|` exactly at the threshold).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Return zero (the sparser representative).
    #[default]
    Zero,
    /// Return the nonzero representative.
    Nonzero,
}

/// Constants of the prox map for a fixed `(weight, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConstants {
    /// Smallest magnitude a nonzero output can take.
    pub min_magnitude: f64,
    /// Inputs with `|a|` below this map to zero, above it to a nonzero point.
    pub threshold: f64,
}

/// A validated `(weight, q, tie rule)` triple defining one prox map.
///
/// `weight` is the full coefficient in front of `|z|^q`; a solver taking a
/// gradient step of size `alpha` against a penalty `lambda * |z|^q` uses
/// `weight = alpha * lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSpec {
    weight: f64,
    q: f64,
    tie: TieBreak,
}

impl ProxSpec {
    pub fn new(weight: f64, q: f64) -> Result<Self, ProxError> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(ProxError::InvalidWeight(weight));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(ProxError::InvalidExponent(q));
        }
        Ok(Self { weight, q, tie: TieBreak::default() })
    }

    pub fn with_tie_break(mut self, tie: TieBreak) -> Self {
        self.tie = tie;
        self
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie
    }

    /// Threshold and minimum nonzero magnitude for this `(weight, q)`.
    pub fn constants(&self) -> ProxConstants {
        let (w, q) = (self.weight, self.q);
        if q == 0.0 {
            // Closed form: both constants coincide at sqrt(2w).
            let r = (2.0 * w).sqrt();
            return ProxConstants { min_magnitude: r, threshold: r };
        }
        // threshold = min_magnitude + w*q*min_magnitude^(q-1), the input at
        // which the zero and nonzero candidates score identically; written in
        // closed form below.
        let min_magnitude = (2.0 * w * (1.0 - q)).powf(1.0 / (2.0 - q));
        let threshold =
            (2.0 - q) * w.powf(1.0 / (2.0 - q)) * (2.0 * (1.0 - q)).powf((1.0 - q) / (q - 2.0));
        ProxConstants { min_magnitude, threshold }
    }

    /// Full minimizer set at `a`: `(primary, alternate)`.
    ///
    /// Below the threshold the set is `{0}`; above it, one nonzero point; at
    /// the threshold exactly (floating-point equality, no epsilon) the set is
    /// `{0, nonzero}` and both are returned.
    pub fn prox_set(&self, a: f64) -> Result<(f64, Option<f64>), ProxError> {
        if !a.is_finite() {
            return Err(ProxError::NonFiniteInput(a));
        }
        let ProxConstants { min_magnitude, threshold } = self.constants();
        let mag = a.abs();
        if mag < threshold {
            Ok((0.0, None))
        } else if mag == threshold {
            Ok((0.0, Some(a.signum() * min_magnitude)))
        } else {
            let z = if self.q == 0.0 {
                mag
            } else {
                nonzero_branch(mag, self.weight, self.q, min_magnitude)?
            };
            Ok((a.signum() * z, None))
        }
    }

    /// Scalar prox; ties resolved by the configured [`TieBreak`].
    pub fn prox(&self, a: f64) -> Result<f64, ProxError> {
        let (primary, alternate) = self.prox_set(a)?;
        Ok(match (self.tie, alternate) {
            (TieBreak::Nonzero, Some(z)) => z,
            _ => primary,
        })
    }

    /// Componentwise prox of a vector.
    pub fn prox_vec(&self, x: &Array1<f64>) -> Result<Array1<f64>, ProxError> {
        let mut out = Array1::zeros(x.len());
        for (o, &v) in out.iter_mut().zip(x.iter()) {
            *o = self.prox(v)?;
        }
        Ok(out)
    }
}

/// Unique root of `z - a + w*q*z^(q-1)` on `[floor, a]`, for `a` above the
/// threshold. Newton from `z = a` with a bisection safeguard; the iteration
/// must reach `|residual| <= 1e-12 * max(1, a)` within 100 steps or the call
/// fails — a silent inaccurate value is never returned.
fn nonzero_branch(a: f64, weight: f64, q: f64, floor: f64) -> Result<f64, ProxError> {
    let wq = weight * q;
    let psi = |z: f64| z - a + wq * z.powf(q - 1.0);
    let dpsi = |z: f64| 1.0 + wq * (q - 1.0) * z.powf(q - 2.0);
    let tol = 1e-12 * a.max(1.0);
    let (mut lo, mut hi) = (floor, a);
    let mut z = a;
    for _ in 0..100 {
        let f = psi(z);
        if f.abs() <= tol {
            // The minimum-magnitude bound is exact for nonzero outputs.
            return Ok(z.max(floor));
        }
        if f > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let step = z - f / dpsi(z);
        z = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Err(ProxError::RootFinder { input: a, weight, q })
}

/// Largest penalty weight for which the origin is guaranteed to be
/// non-stationary for a step size `alpha`:
/// `alpha^(1-q) / 2 * ||grad_f(0)||_inf^(2-q)`.
///
/// Running a solver with `lambda` at or above this ceiling risks collapsing
/// every iterate to zero. Errors when the gradient at the origin vanishes.
pub fn lambda_upper_bound(grad0: &Array1<f64>, alpha: f64, q: f64) -> Result<f64, ProxError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ProxError::InvalidStep(alpha));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(ProxError::InvalidExponent(q));
    }
    let g = crate::linops::norm_inf(grad0);
    if g == 0.0 {
        return Err(ProxError::ZeroGradient);
    }
    Ok(0.5 * alpha.powf(1.0 - q) * g.powf(2.0 - q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr1;
    use proptest::prelude::*;

    /// Objective the prox minimizes, with the `0^0 := 0` convention.
    fn phi(z: f64, a: f64, w: f64, q: f64) -> f64 {
        let pen = if z == 0.0 { 0.0 } else { w * z.abs().powf(q) };
        0.5 * (z - a) * (z - a) + pen
    }

    #[test]
    fn constants_hard_threshold_case() {
        let c = ProxSpec::new(0.5, 0.0).unwrap().constants();
        assert_eq!(c.min_magnitude, 1.0);
        assert_eq!(c.threshold, 1.0);
    }

    #[test]
    fn constants_half_exponent_case() {
        let c = ProxSpec::new(1.0, 0.5).unwrap().constants();
        assert_eq!(c.min_magnitude, 1.0);
        assert_eq!(c.threshold, 1.5);
    }

    #[test]
    fn constants_vanish_with_weight() {
        for q in [0.0, 0.3, 0.5, 0.9] {
            let c = ProxSpec::new(1e-12, q).unwrap().constants();
            assert!(c.min_magnitude < 1e-5 && c.min_magnitude > 0.0);
            assert!(c.threshold < 1e-5 && c.threshold > 0.0);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(ProxSpec::new(0.0, 0.5), Err(ProxError::InvalidWeight(_))));
        assert!(matches!(ProxSpec::new(-1.0, 0.5), Err(ProxError::InvalidWeight(_))));
        assert!(matches!(ProxSpec::new(f64::NAN, 0.5), Err(ProxError::InvalidWeight(_))));
        assert!(matches!(ProxSpec::new(1.0, 1.0), Err(ProxError::InvalidExponent(_))));
        assert!(matches!(ProxSpec::new(1.0, -0.1), Err(ProxError::InvalidExponent(_))));
        let spec = ProxSpec::new(1.0, 0.5).unwrap();
        assert!(matches!(spec.prox(f64::INFINITY), Err(ProxError::NonFiniteInput(_))));
    }

    #[test]
    fn hard_threshold_keeps_or_kills() {
        let spec = ProxSpec::new(0.5, 0.0).unwrap();
        assert_eq!(spec.prox(2.0).unwrap(), 2.0);
        assert_eq!(spec.prox(0.5).unwrap(), 0.0);
        assert_eq!(spec.prox(-0.99).unwrap(), 0.0);
        assert_eq!(spec.prox(-1.5).unwrap(), -1.5);
    }

    #[test]
    fn tie_at_threshold_obeys_tie_break() {
        // weight 1, q 1/2: threshold 1.5, nonzero tie representative has
        // magnitude 1 and the two candidates score identically.
        let spec = ProxSpec::new(1.0, 0.5).unwrap();
        assert_eq!(spec.prox(1.5).unwrap(), 0.0);
        assert_eq!(spec.prox(-1.5).unwrap(), 0.0);
        let (primary, alternate) = spec.prox_set(1.5).unwrap();
        assert_eq!(primary, 0.0);
        assert_eq!(alternate, Some(1.0));
        assert_eq!(phi(0.0, 1.5, 1.0, 0.5), phi(1.0, 1.5, 1.0, 0.5));

        let prefer = spec.with_tie_break(TieBreak::Nonzero);
        assert_eq!(prefer.prox(1.5).unwrap(), 1.0);
        assert_eq!(prefer.prox(-1.5).unwrap(), -1.0);
        // Off the tie both rules agree.
        assert_eq!(prefer.prox(1.4).unwrap(), 0.0);
        assert_eq!(spec.prox(1.6).unwrap(), prefer.prox(1.6).unwrap());
    }

    #[test]
    fn nonzero_branch_value_half_exponent() {
        let spec = ProxSpec::new(1.0, 0.5).unwrap();
        let z = spec.prox(2.0).unwrap();
        assert!((z - 1.605).abs() < 1e-3, "expected about 1.605, got {z}");
        // The returned point satisfies the stationarity equation tightly.
        let residual = z - 2.0 + 0.5 * z.powf(-0.5);
        assert!(residual.abs() <= 1e-12 * 2.0);
        // And beats a brute-force scan of the objective.
        let mut best = f64::INFINITY;
        for i in 0..=200_000 {
            let cand = -3.0 + i as f64 * 3e-5;
            best = best.min(phi(cand, 2.0, 1.0, 0.5));
        }
        assert!(phi(z, 2.0, 1.0, 0.5) <= best + 1e-9);
    }

    #[test]
    fn tie_scores_match_generally() {
        for (w, q) in [(0.3, 0.1), (1.7, 0.5), (0.9, 0.8), (2.0, 0.2)] {
            let spec = ProxSpec::new(w, q).unwrap();
            let ProxConstants { min_magnitude, threshold } = spec.constants();
            let f0 = phi(0.0, threshold, w, q);
            let fc = phi(min_magnitude, threshold, w, q);
            assert!(
                (f0 - fc).abs() <= 1e-10 * (1.0 + f0.abs()),
                "tie scores diverge for w={w}, q={q}: {f0} vs {fc}"
            );
        }
    }

    #[test]
    fn lambda_upper_bound_values() {
        let g = arr1(&[2.0, -1.0, 0.5]);
        assert_eq!(lambda_upper_bound(&g, 1.0, 0.0).unwrap(), 2.0);
        let unit = arr1(&[0.0, 1.0]);
        for q in [0.0, 0.3, 0.5, 0.9] {
            assert_eq!(lambda_upper_bound(&unit, 1.0, q).unwrap(), 0.5);
        }
        let zero = arr1(&[0.0, 0.0]);
        assert!(matches!(lambda_upper_bound(&zero, 1.0, 0.5), Err(ProxError::ZeroGradient)));
        assert!(matches!(lambda_upper_bound(&g, 0.0, 0.5), Err(ProxError::InvalidStep(_))));
    }

    #[test]
    fn vector_prox_is_componentwise() {
        let spec = ProxSpec::new(1.0, 0.5).unwrap();
        let x = arr1(&[2.0, -2.0, 0.3, 1.5, 0.0]);
        let out = spec.prox_vec(&x).unwrap();
        for (i, &v) in x.iter().enumerate() {
            assert_eq!(out[i], spec.prox(v).unwrap());
        }
    }

    proptest! {
        #[test]
        fn zero_iff_below_threshold(
            a in -3.0f64..3.0,
            w in 0.05f64..2.0,
            tenths in 0u32..10,
        ) {
            let q = f64::from(tenths) / 10.0;
            let spec = ProxSpec::new(w, q).unwrap();
            let z = spec.prox(a).unwrap();
            let k = spec.constants();
            if a.abs() <= k.threshold {
                prop_assert_eq!(z, 0.0);
            } else {
                prop_assert!(z != 0.0);
                prop_assert!(z.abs() >= k.min_magnitude);
                prop_assert!(z.abs() <= a.abs());
                prop_assert_eq!(z.signum(), a.signum());
            }
        }

        #[test]
        fn odd_symmetry(
            a in 0.0f64..3.0,
            w in 0.05f64..2.0,
            tenths in 0u32..10,
        ) {
            let q = f64::from(tenths) / 10.0;
            let spec = ProxSpec::new(w, q).unwrap();
            prop_assert_eq!(spec.prox(-a).unwrap(), -spec.prox(a).unwrap());
        }

        #[test]
        fn beats_coarse_grid(
            a in -3.0f64..3.0,
            w in 0.05f64..2.0,
            tenths in 0u32..10,
        ) {
            let q = f64::from(tenths) / 10.0;
            let spec = ProxSpec::new(w, q).unwrap();
            let z = spec.prox(a).unwrap();
            let fz = phi(z, a, w, q);
            // 0 and a are always candidate points.
            prop_assert!(fz <= phi(0.0, a, w, q) + 1e-12);
            prop_assert!(fz <= phi(a, a, w, q) + 1e-12);
            let span = a.abs() + 1.0;
            let n = 2000;
            for i in 0..=n {
                let cand = -span + 2.0 * span * (i as f64) / (n as f64);
                prop_assert!(fz <= phi(cand, a, w, q) + 1e-12);
            }
        }
    }
}
