//! Classical dynamics of hyperbolic toral automorphisms `x ↦ Ax mod ℤ²`.
//!
//! Everything that can be done in integer arithmetic is: hyperbolicity,
//! orbits of rational points and periods of `A` modulo `m`. Floating point
//! only enters for the eigen-data and for the survivor sets used by the
//! porosity experiments.

mod hole;
mod orbit;

pub use hole::{ehrenfest_steps, survives, survivor_mask, HoleRegion, OrbitDirection, SurvivorMask};
pub use orbit::{
    orbit_of_rational, period_mod, period_mod_bounded, special_n_scan, PeriodicOrbit,
    RationalPoint,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: i64 },
    #[error("matrix is not hyperbolic (trace = {trace}, need |trace| > 2)")]
    NotHyperbolic { trace: i64 },
    #[error("integer overflow while forming matrix product")]
    Overflow,
    #[error("invalid rational point: {0}")]
    InvalidPoint(String),
    #[error("invalid hole region: {0}")]
    InvalidHole(String),
    #[error("mixture weight {0} outside [0, 1]")]
    InvalidWeight(f64),
}

impl DynamicsError {
    pub fn code(&self) -> &'static str {
        match self {
            DynamicsError::NotUnimodular { .. } => "NOT_UNIMODULAR",
            DynamicsError::NotHyperbolic { .. } => "NOT_HYPERBOLIC",
            DynamicsError::Overflow => "OVERFLOW",
            DynamicsError::InvalidPoint(_) => "INVALID_POINT",
            DynamicsError::InvalidHole(_) => "INVALID_HOLE",
            DynamicsError::InvalidWeight(_) => "INVALID_WEIGHT",
        }
    }
}

/// A hyperbolic element of `SL(2, ℤ)`, stored row-major as `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 2]; 2]", into = "[[i64; 2]; 2]")]
pub struct CatMatrix {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl CatMatrix {
    /// Validates `det = 1` and `|trace| > 2`.
    pub fn new(m: [[i64; 2]; 2]) -> Result<Self, DynamicsError> {
        let [[a, b], [c, d]] = m;
        let det = a
            .checked_mul(d)
            .zip(b.checked_mul(c))
            .and_then(|(ad, bc)| ad.checked_sub(bc))
            .ok_or(DynamicsError::Overflow)?;
        if det != 1 {
            return Err(DynamicsError::NotUnimodular { det });
        }
        let trace = a.checked_add(d).ok_or(DynamicsError::Overflow)?;
        if trace.abs() <= 2 {
            return Err(DynamicsError::NotHyperbolic { trace });
        }
        Ok(CatMatrix { a, b, c, d })
    }

    /// The standard example `[[2, 1], [1, 1]]`.
    pub fn arnold() -> Self {
        CatMatrix { a: 2, b: 1, c: 1, d: 1 }
    }

    pub fn entries(&self) -> [[i64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Self {
        CatMatrix { a: self.a, b: self.c, c: self.b, d: self.d }
    }

    pub fn inverse(&self) -> Self {
        CatMatrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Matrix product `self · other`; the result must again be hyperbolic.
    pub fn checked_mul(&self, other: &CatMatrix) -> Result<CatMatrix, DynamicsError> {
        let p = mul_i64(self.entries(), other.entries()).ok_or(DynamicsError::Overflow)?;
        CatMatrix::new(p)
    }

    /// `A^k` for `k ≥ 1` (powers of a hyperbolic matrix stay hyperbolic).
    pub fn checked_pow(&self, k: u32) -> Result<CatMatrix, DynamicsError> {
        assert!(k >= 1, "power must be positive");
        let mut acc = *self;
        for _ in 1..k {
            acc = acc.checked_mul(self)?;
        }
        Ok(acc)
    }

    /// Action on an integer frequency vector by `Aᵀ`: `e_k ∘ A = e_{Aᵀ k}`.
    pub fn transpose_apply(&self, k: (i64, i64)) -> (i64, i64) {
        (self.a * k.0 + self.c * k.1, self.b * k.0 + self.d * k.1)
    }

    /// One step of the map on `[0,1)²`.
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let x = self.a as f64 * p[0] + self.b as f64 * p[1];
        let y = self.c as f64 * p[0] + self.d as f64 * p[1];
        [wrap_unit(x), wrap_unit(y)]
    }

    /// Eigen-data of `A` as a real matrix.
    pub fn hyperbolic_data(&self) -> HyperbolicData {
        HyperbolicData::of(self)
    }
}

impl TryFrom<[[i64; 2]; 2]> for CatMatrix {
    type Error = DynamicsError;

    fn try_from(m: [[i64; 2]; 2]) -> Result<Self, Self::Error> {
        CatMatrix::new(m)
    }
}

impl From<CatMatrix> for [[i64; 2]; 2] {
    fn from(m: CatMatrix) -> Self {
        m.entries()
    }
}

impl fmt::Display for CatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Validates an arbitrary integer 2×2 matrix as a cat map.
pub fn validate_cat(m: [[i64; 2]; 2]) -> Result<CatMatrix, DynamicsError> {
    CatMatrix::new(m)
}

pub(crate) fn mul_i64(x: [[i64; 2]; 2], y: [[i64; 2]; 2]) -> Option<[[i64; 2]; 2]> {
    let e = |i: usize, j: usize| -> Option<i64> {
        x[i][0].checked_mul(y[0][j])?.checked_add(x[i][1].checked_mul(y[1][j])?)
    };
    Some([[e(0, 0)?, e(0, 1)?], [e(1, 0)?, e(1, 1)?]])
}

/// Reduces a real number into `[0, 1)`.
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Expanding/contracting eigen-data of a hyperbolic `A`.
///
/// `lambda_plus` is the eigenvalue with `|λ| > 1`; it is negative when
/// `trace A < -2`. The entropy is `log |λ₊|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicData {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub unstable_dir: [f64; 2],
    pub stable_dir: [f64; 2],
    pub entropy: f64,
}

impl HyperbolicData {
    pub fn of(m: &CatMatrix) -> Self {
        let t = m.trace() as f64;
        let disc = (t * t - 4.0).sqrt();
        // larger-modulus root without cancellation; the other is its reciprocal
        let lambda_plus = 0.5 * (t + t.signum() * disc);
        let lambda_minus = 1.0 / lambda_plus;
        HyperbolicData {
            lambda_plus,
            lambda_minus,
            unstable_dir: eigenvector(m, lambda_plus),
            stable_dir: eigenvector(m, lambda_minus),
            entropy: lambda_plus.abs().ln(),
        }
    }
}

fn eigenvector(m: &CatMatrix, lambda: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = m.entries().map(|r| r.map(|v| v as f64));
    // rows of (A − λI) are orthogonal to the eigenvector; use the better conditioned one
    let r1 = (a - lambda, b);
    let r2 = (c, d - lambda);
    let (p, q) = if r1.0.hypot(r1.1) >= r2.0.hypot(r2.1) { r1 } else { r2 };
    let mut v = [-q, p];
    let n = v[0].hypot(v[1]);
    v[0] /= n;
    v[1] /= n;
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

/// `A^t x mod 1` for a real point; negative `t` iterates `A⁻¹`.
pub fn iterate(m: &CatMatrix, x: [f64; 2], t: i64) -> [f64; 2] {
    let step = if t >= 0 { *m } else { m.inverse() };
    let mut p = [wrap_unit(x[0]), wrap_unit(x[1])];
    for _ in 0..t.unsigned_abs() {
        p = step.apply(p);
    }
    p
}

/// Kolmogorov–Sinai entropy of `α·Lebesgue + (1 − α)·(periodic-orbit measure)`.
///
/// Entropy is affine on invariant measures and vanishes on orbit measures,
/// so this is `α · log |λ₊|`.
pub fn ks_entropy_mixture(alpha: f64, m: &CatMatrix) -> Result<f64, DynamicsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DynamicsError::InvalidWeight(alpha));
    }
    Ok(alpha * HyperbolicData::of(m).entropy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validates_examples() {
        assert!(validate_cat([[2, 1], [1, 1]]).is_ok());
        assert_eq!(
            validate_cat([[1, 0], [0, 1]]),
            Err(DynamicsError::NotHyperbolic { trace: 2 })
        );
        assert_eq!(
            validate_cat([[0, -1], [1, 0]]),
            Err(DynamicsError::NotHyperbolic { trace: 0 })
        );
        assert_eq!(
            validate_cat([[1, 1], [0, 1]]),
            Err(DynamicsError::NotHyperbolic { trace: 2 })
        );
        assert_eq!(
            validate_cat([[2, 1], [1, 2]]),
            Err(DynamicsError::NotUnimodular { det: 3 })
        );
        assert!(validate_cat([[-2, 1], [1, -1]]).is_ok());
    }

    #[test]
    fn arnold_eigen_data() {
        // roots of t² − 3t + 1
        let expected = (3.0 + 5f64.sqrt()) / 2.0;
        let h = CatMatrix::arnold().hyperbolic_data();
        assert!((h.lambda_plus - expected).abs() < 1e-15);
        assert!((h.lambda_plus - 2.618034).abs() < 1e-6);
        assert!((h.entropy - 0.962424).abs() < 1e-6);
        assert!((h.lambda_plus * h.lambda_minus - 1.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_mixture() {
        let a = CatMatrix::arnold();
        assert!((ks_entropy_mixture(0.5, &a).unwrap() - 0.481212).abs() < 1e-6);
        assert_eq!(ks_entropy_mixture(0.0, &a).unwrap(), 0.0);
        assert!((ks_entropy_mixture(1.0, &a).unwrap() - 0.962424).abs() < 1e-6);
        assert!(ks_entropy_mixture(1.5, &a).is_err());
    }

    #[test]
    fn iterate_examples() {
        let a = CatMatrix::arnold();
        let p = iterate(&a, [1.0 / 3.0, 0.0], 1);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iterate(&a, [0.25, 0.5], 0), [0.25, 0.5]);
        let back = iterate(&a, iterate(&a, [0.3, 0.7], -1), 1);
        assert!((back[0] - 0.3).abs() < 1e-14 && (back[1] - 0.7).abs() < 1e-14);
    }

    fn cat_strategy() -> impl Strategy<Value = CatMatrix> {
        // products of the two shears generate hyperbolic matrices when both powers are nonzero
        (1i64..5, 1i64..5, any::<bool>()).prop_map(|(p, q, neg)| {
            let m = mul_i64([[1, p], [0, 1]], [[1, 0], [q, 1]]).unwrap();
            let m = if neg { m.map(|r| r.map(|v| -v)) } else { m };
            CatMatrix::new(m).unwrap()
        })
    }

    proptest! {
        #[test]
        fn eigenvectors_have_tiny_residuals(m in cat_strategy()) {
            let h = m.hyperbolic_data();
            prop_assert!(h.lambda_plus.abs() > 1.0);
            let [[a, b], [c, d]] = m.entries().map(|r| r.map(|v| v as f64));
            let v = h.unstable_dir;
            let r0 = a * v[0] + b * v[1] - h.lambda_plus * v[0];
            let r1 = c * v[0] + d * v[1] - h.lambda_plus * v[1];
            prop_assert!(r0.hypot(r1) <= 1e-12 * h.lambda_plus.abs().max(1.0));
            let w = h.stable_dir;
            let s0 = a * w[0] + b * w[1] - h.lambda_minus * w[0];
            let s1 = c * w[0] + d * w[1] - h.lambda_minus * w[1];
            prop_assert!(s0.hypot(s1) <= 1e-12 * h.lambda_plus.abs().max(1.0));
        }

        #[test]
        fn entropy_is_affine(alpha in 0.0f64..=1.0, beta in 0.0f64..=1.0, m in cat_strategy()) {
            let mid = 0.5 * (alpha + beta);
            let lhs = ks_entropy_mixture(mid, &m).unwrap();
            let rhs = 0.5 * (ks_entropy_mixture(alpha, &m).unwrap() + ks_entropy_mixture(beta, &m).unwrap());
            prop_assert!((lhs - rhs).abs() < 1e-14);
        }
    }
}
