//! Quantization of trigonometric polynomials on the torus to `N×N` matrices.
//!
//! Conventions. Symbols are finite sums `a = Σ â(k) e_k` with
//! `e_k(x, ξ) = exp(2πi(k₁x + k₂ξ))`. The Hilbert space is `ℂ^N` with basis
//! sites at positions `x_j = (j + θ₁)/N` and quasi-periodicity
//! `u_{j+N} = e^{2πiθ₂} u_j`; the semiclassical parameter is `h = 1/(2πN)`.
//!
//! The translation operators are the symmetric (Weyl) products
//! `T(k) = e^{iπk₁k₂/N} Z^{k₁} S^{k₂}` of the modulation
//! `(Z u)_j = e^{2πi(j+θ₁)/N} u_j` and the shift `(S u)_j = u_{j+1}`, and
//! `Op_N(e_k) = T(k)`. They satisfy
//!
//! * `T(k)* = T(−k)` exactly, so real symbols quantize to Hermitian matrices;
//! * `T(k) T(l) = e^{−iπ(k₁l₂ − k₂l₁)/N} T(k + l)`;
//! * `tr T(k) = 0` unless `k ≡ 0 mod N`.
//!
//! `T(k)` moves phase space by `(−k₂, k₁)/N`, which is the time-one flow of
//! the Hamiltonian `e_k` rescaled by `h`.

use crate::dynamics::CatMatrix;
use crate::linalg::{c, op_norm, CMatrix, CVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

pub const NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantizationError {
    #[error("Hilbert space dimension must be positive")]
    ZeroDimension,
    #[error("odd dimension N = {0} requires an explicit twist θ")]
    OddDimensionNeedsTwist(usize),
    #[error("twist components must lie in [0, 1), got ({0}, {1})")]
    InvalidTwist(f64, f64),
    #[error("vector is not normalized (norm = {0})")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("symbol is not real: coefficient at {0:?} is not the conjugate of its mirror")]
    NotRealSymbol((i64, i64)),
}

impl QuantizationError {
    pub fn code(&self) -> &'static str {
        match self {
            QuantizationError::ZeroDimension => "ZERO_DIMENSION",
            QuantizationError::OddDimensionNeedsTwist(_) => "ODD_DIMENSION_NEEDS_TWIST",
            QuantizationError::InvalidTwist(..) => "INVALID_TWIST",
            QuantizationError::NotNormalized(_) => "NOT_NORMALIZED",
            QuantizationError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            QuantizationError::NotRealSymbol(_) => "NOT_REAL_SYMBOL",
        }
    }
}

/// Dimension `N`, twist `θ` and `h = 1/(2πN)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumTorus {
    n: usize,
    theta: [f64; 2],
}

impl QuantumTorus {
    /// Untwisted torus; `N` must be even.
    pub fn new(n: usize) -> Result<Self, QuantizationError> {
        if n == 0 {
            return Err(QuantizationError::ZeroDimension);
        }
        if n % 2 == 1 {
            return Err(QuantizationError::OddDimensionNeedsTwist(n));
        }
        Ok(QuantumTorus { n, theta: [0.0, 0.0] })
    }

    pub fn with_twist(n: usize, theta: [f64; 2]) -> Result<Self, QuantizationError> {
        if n == 0 {
            return Err(QuantizationError::ZeroDimension);
        }
        if !theta.iter().all(|t| (0.0..1.0).contains(t)) {
            return Err(QuantizationError::InvalidTwist(theta[0], theta[1]));
        }
        Ok(QuantumTorus { n, theta })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn theta(&self) -> [f64; 2] {
        self.theta
    }

    pub fn is_untwisted(&self) -> bool {
        self.theta == [0.0, 0.0]
    }

    /// `h = 1/(2πN)`.
    pub fn h(&self) -> f64 {
        1.0 / (2.0 * PI * self.n as f64)
    }

    /// Nonzero entries of `T(k)`: row `j` has its single entry in column `cols[j]`.
    pub fn translation(&self, k: (i64, i64)) -> Monomial {
        let n = self.n as i64;
        let nf = self.n as f64;
        let (k1, k2) = k;
        // e^{iπ k₁k₂/N} with the product reduced mod 2N
        let sym = Complex64::from_polar(1.0, PI * (k1 as i128 * k2 as i128).rem_euclid(2 * n as i128) as f64 / nf);
        let twist_x = Complex64::from_polar(1.0, 2.0 * PI * k1 as f64 * self.theta[0] / nf);
        let mut cols = Vec::with_capacity(self.n);
        let mut vals = Vec::with_capacity(self.n);
        for j in 0..n {
            let s = j + k2;
            let (wraps, col) = (s.div_euclid(n), s.rem_euclid(n));
            let modulation = Complex64::from_polar(1.0, 2.0 * PI * (k1.rem_euclid(n) * j % n) as f64 / nf);
            let boundary = if self.theta[1] == 0.0 {
                c(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, 2.0 * PI * self.theta[1] * wraps as f64)
            };
            cols.push(col as usize);
            vals.push(sym * twist_x * modulation * boundary);
        }
        Monomial { cols, vals }
    }
}

/// A matrix with exactly one nonzero entry per row: `M[j, cols[j]] = vals[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl Monomial {
    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.dim();
        let mut m = CMatrix::zeros(n, n);
        for (j, (&col, &v)) in self.cols.iter().zip(&self.vals).enumerate() {
            m[(j, col)] += v;
        }
        m
    }

    pub fn apply(&self, u: &CVector) -> CVector {
        CVector::from_fn(self.dim(), |j, _| self.vals[j] * u[self.cols[j]])
    }

    /// `M · X` in `O(N²)`.
    pub fn left_mul(&self, x: &CMatrix) -> CMatrix {
        CMatrix::from_fn(x.nrows(), x.ncols(), |j, k| self.vals[j] * x[(self.cols[j], k)])
    }

    /// `X · M*` in `O(N²)`; for unitary `M` this is `X M⁻¹`.
    pub fn right_mul_adjoint(&self, x: &CMatrix) -> CMatrix {
        CMatrix::from_fn(x.nrows(), x.ncols(), |j, k| x[(j, self.cols[k])] * self.vals[k].conj())
    }

    /// `X · M` in `O(N²)`.
    pub fn right_mul(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(x.nrows(), x.ncols());
        for (r, (&col, &v)) in self.cols.iter().zip(&self.vals).enumerate() {
            // (X M)[:, col] += X[:, r] · v
            let src = x.column(r) * v;
            let mut dst = out.column_mut(col);
            dst += src;
        }
        out
    }

    /// `⟨M u, u⟩ = Σ_j (M u)_j conj(u_j)`.
    pub fn expectation(&self, u: &CVector) -> Complex64 {
        self.cols
            .iter()
            .zip(&self.vals)
            .enumerate()
            .map(|(j, (&col, &v))| v * u[col] * u[j].conj())
            .sum()
    }
}

/// Finite Fourier series on the torus.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "SymbolRepr", try_from = "SymbolRepr")]
pub struct TorusSymbol {
    coeffs: BTreeMap<(i64, i64), Complex64>,
    declared_real: bool,
}

/// Serialized form: `terms = [[k1, k2, re, im], ...]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolRepr {
    pub terms: Vec<(i64, i64, f64, f64)>,
    #[serde(default)]
    pub real: bool,
}

impl From<TorusSymbol> for SymbolRepr {
    fn from(s: TorusSymbol) -> Self {
        SymbolRepr {
            terms: s.coeffs.iter().map(|(&(k1, k2), z)| (k1, k2, z.re, z.im)).collect(),
            real: s.declared_real,
        }
    }
}

impl TryFrom<SymbolRepr> for TorusSymbol {
    type Error = QuantizationError;

    fn try_from(r: SymbolRepr) -> Result<Self, Self::Error> {
        let s = TorusSymbol::from_terms(r.terms.into_iter().map(|(k1, k2, re, im)| ((k1, k2), c(re, im))));
        if r.real {
            s.declare_real()
        } else {
            Ok(s)
        }
    }
}

impl TorusSymbol {
    pub fn from_terms<I: IntoIterator<Item = ((i64, i64), Complex64)>>(terms: I) -> Self {
        let mut s = TorusSymbol::default();
        for (k, v) in terms {
            *s.coeffs.entry(k).or_default() += v;
        }
        s.prune();
        s
    }

    pub fn constant(v: f64) -> Self {
        TorusSymbol::from_terms([((0, 0), c(v, 0.0))]).real_unchecked()
    }

    /// `e_k(x, ξ) = exp(2πi(k₁x + k₂ξ))`.
    pub fn exponential(k: (i64, i64)) -> Self {
        TorusSymbol::from_terms([(k, c(1.0, 0.0))])
    }

    pub fn cos_x() -> Self {
        Self::cosine((1, 0))
    }

    pub fn cos_xi() -> Self {
        Self::cosine((0, 1))
    }

    /// `cos(2π k·(x, ξ))`.
    pub fn cosine(k: (i64, i64)) -> Self {
        TorusSymbol::from_terms([(k, c(0.5, 0.0)), ((-k.0, -k.1), c(0.5, 0.0))]).real_unchecked()
    }

    /// Checks `â(−k) = conj â(k)` (to 1e-14) and marks the symbol real.
    pub fn declare_real(mut self) -> Result<Self, QuantizationError> {
        for (&(k1, k2), v) in &self.coeffs {
            let mirror = self.coeff((-k1, -k2));
            if (mirror - v.conj()).norm() > 1e-14 * (1.0 + v.norm()) {
                return Err(QuantizationError::NotRealSymbol((k1, k2)));
            }
        }
        self.declared_real = true;
        Ok(self)
    }

    fn real_unchecked(mut self) -> Self {
        self.declared_real = true;
        self
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, v| *v != Complex64::default());
    }

    pub fn is_real(&self) -> bool {
        self.declared_real
    }

    pub fn coeff(&self, k: (i64, i64)) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.coeffs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `∫ a = â(0)`.
    pub fn mean(&self) -> Complex64 {
        self.coeff((0, 0))
    }

    /// `max |k|∞` over the support.
    pub fn degree(&self) -> i64 {
        self.coeffs.keys().map(|&(a, b)| a.abs().max(b.abs())).max().unwrap_or(0)
    }

    /// `Σ |â(k)|`, an upper bound for both `sup |a|` and `‖Op_N(a)‖`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|v| v.norm()).sum()
    }

    pub fn evaluate(&self, x: f64, xi: f64) -> Complex64 {
        self.terms()
            .map(|((k1, k2), v)| v * Complex64::from_polar(1.0, 2.0 * PI * (k1 as f64 * x + k2 as f64 * xi)))
            .sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let out = TorusSymbol::from_terms(self.terms().map(|(k, v)| (k, v * s)));
        if self.declared_real && s.im == 0.0 {
            out.real_unchecked()
        } else {
            out
        }
    }

    pub fn add(&self, other: &TorusSymbol) -> Self {
        let out = TorusSymbol::from_terms(self.terms().chain(other.terms()));
        if self.declared_real && other.declared_real {
            out.real_unchecked()
        } else {
            out
        }
    }

    /// Pointwise product, i.e. Fourier convolution.
    pub fn mul(&self, other: &TorusSymbol) -> Self {
        let out = TorusSymbol::from_terms(
            self.terms()
                .flat_map(|(k, a)| other.terms().map(move |(l, b)| ((k.0 + l.0, k.1 + l.1), a * b))),
        );
        if self.declared_real && other.declared_real {
            out.real_unchecked()
        } else {
            out
        }
    }

    /// Complex conjugate `ā`, with `(ā)^(k) = conj â(−k)`.
    pub fn conj(&self) -> Self {
        let out = TorusSymbol::from_terms(self.terms().map(|((k1, k2), v)| ((-k1, -k2), v.conj())));
        if self.declared_real {
            out.real_unchecked()
        } else {
            out
        }
    }

    /// `∂_x a`.
    pub fn d_x(&self) -> Self {
        TorusSymbol::from_terms(self.terms().map(|(k, v)| (k, v * c(0.0, 2.0 * PI * k.0 as f64))))
    }

    /// `∂_ξ a`.
    pub fn d_xi(&self) -> Self {
        TorusSymbol::from_terms(self.terms().map(|(k, v)| (k, v * c(0.0, 2.0 * PI * k.1 as f64))))
    }

    /// `a ∘ A`, using `e_k ∘ A = e_{Aᵀk}`.
    pub fn pullback(&self, m: &CatMatrix) -> Self {
        let out = TorusSymbol::from_terms(self.terms().map(|(k, v)| (m.transpose_apply(k), v)));
        if self.declared_real {
            out.real_unchecked()
        } else {
            out
        }
    }

    /// Random trigonometric polynomial with `|k|∞ ≤ degree` and standard normal coefficients.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, degree: i64, real: bool) -> Self {
        let mut terms = Vec::new();
        for k1 in -degree..=degree {
            for k2 in -degree..=degree {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                terms.push(((k1, k2), c(re, im)));
            }
        }
        let s = TorusSymbol::from_terms(terms);
        if real {
            // (a + ā)/2 is conjugate-symmetric
            s.add(&s.conj()).scale(c(0.5, 0.0)).real_unchecked()
        } else {
            s
        }
    }
}

/// Poisson bracket `{a, b} = ∂_ξa ∂_xb − ∂_xa ∂_ξb`.
pub fn poisson_bracket(a: &TorusSymbol, b: &TorusSymbol) -> TorusSymbol {
    let out = a.d_xi().mul(&b.d_x()).add(&a.d_x().mul(&b.d_xi()).scale(c(-1.0, 0.0)));
    if a.is_real() && b.is_real() {
        out.real_unchecked()
    } else {
        out
    }
}

/// An `N×N` quantized observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableMatrix {
    pub entries: CMatrix,
    pub hermitian: bool,
}

impl ObservableMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// `max |M − M*|` entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let d = &self.entries - self.entries.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `T_N(k) = Op_N(e_k)` as a dense unitary matrix.
pub fn weyl_translation(qt: &QuantumTorus, k: (i64, i64)) -> ObservableMatrix {
    ObservableMatrix { entries: qt.translation(k).to_dense(), hermitian: false }
}

/// `Op_N(a) = Σ_k â(k) T_N(k)`.
pub fn quantize(qt: &QuantumTorus, a: &TorusSymbol) -> ObservableMatrix {
    let n = qt.dim();
    let mut m = CMatrix::zeros(n, n);
    for (k, v) in a.terms() {
        let t = qt.translation(k);
        for (j, (&col, &w)) in t.cols.iter().zip(&t.vals).enumerate() {
            m[(j, col)] += v * w;
        }
    }
    if a.is_real() {
        // exact Hermitian symmetry; the two triangles differ only by rounding
        let adj = m.adjoint();
        m = (m + adj) * c(0.5, 0.0);
    }
    ObservableMatrix { entries: m, hermitian: a.is_real() }
}

/// `‖Op_N(a) Op_N(b) − Op_N(ab)‖`.
pub fn product_defect(qt: &QuantumTorus, a: &TorusSymbol, b: &TorusSymbol) -> f64 {
    let qa = quantize(qt, a).entries;
    let qb = quantize(qt, b).entries;
    let qab = quantize(qt, &a.mul(b)).entries;
    op_norm(&(qa * qb - qab))
}

/// `‖[Op_N(a), Op_N(b)] + ih Op_N({a, b})‖`.
pub fn commutator_defect(qt: &QuantumTorus, a: &TorusSymbol, b: &TorusSymbol) -> f64 {
    let qa = quantize(qt, a).entries;
    let qb = quantize(qt, b).entries;
    let bracket = quantize(qt, &poisson_bracket(a, b)).entries;
    let comm = &qa * &qb - &qb * &qa;
    op_norm(&(comm + bracket * c(0.0, qt.h())))
}

pub fn check_normalized(u: &CVector) -> Result<(), QuantizationError> {
    let norm = u.norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(QuantizationError::NotNormalized(norm));
    }
    Ok(())
}

/// `⟨M u, u⟩` for a unit vector `u`.
pub fn matrix_element(m: &ObservableMatrix, u: &CVector) -> Result<Complex64, QuantizationError> {
    if u.len() != m.dim() {
        return Err(QuantizationError::DimensionMismatch { expected: m.dim(), got: u.len() });
    }
    check_normalized(u)?;
    Ok((&m.entries * u).dotc(u).conj())
}

/// `⟨Op_N(a) u, u⟩` evaluated mode by mode, without forming the matrix.
pub fn expectation(qt: &QuantumTorus, a: &TorusSymbol, u: &CVector) -> Result<Complex64, QuantizationError> {
    if u.len() != qt.dim() {
        return Err(QuantizationError::DimensionMismatch { expected: qt.dim(), got: u.len() });
    }
    check_normalized(u)?;
    Ok(a.terms().map(|(k, v)| v * qt.translation(k).expectation(u)).sum())
}

/// Moments `⟨Op_N(a_i) u, u⟩` of the empirical semiclassical measure of `u`.
pub fn measure_moments(
    qt: &QuantumTorus,
    u: &CVector,
    symbols: &[TorusSymbol],
) -> Result<Vec<Complex64>, QuantizationError> {
    symbols.iter().map(|a| expectation(qt, a, u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::op_norm_bound;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn torus_construction() {
        assert!(QuantumTorus::new(0).is_err());
        assert_eq!(QuantumTorus::new(7), Err(QuantizationError::OddDimensionNeedsTwist(7)));
        assert!(QuantumTorus::with_twist(7, [0.5, 0.5]).is_ok());
        assert!(QuantumTorus::with_twist(8, [1.0, 0.0]).is_err());
        let qt = QuantumTorus::new(10).unwrap();
        assert_eq!(2.0 * PI * qt.dim() as f64 * qt.h(), 1.0);
    }

    #[test]
    fn translation_zero_is_identity() {
        let qt = QuantumTorus::new(8).unwrap();
        assert_eq!(weyl_translation(&qt, (0, 0)).entries, CMatrix::identity(8, 8));
    }

    #[test]
    fn translation_product_and_adjoint() {
        // oracle: dense matrix multiplication and conjugate transpose
        let mut r = rng();
        for qt in [
            QuantumTorus::new(12).unwrap(),
            QuantumTorus::with_twist(9, [0.3, 0.7]).unwrap(),
        ] {
            let n = qt.dim() as f64;
            for _ in 0..20 {
                let k = (r.random_range(-30..30), r.random_range(-30..30));
                let l = (r.random_range(-30..30), r.random_range(-30..30));
                let tk = weyl_translation(&qt, k).entries;
                let tl = weyl_translation(&qt, l).entries;
                let tkl = weyl_translation(&qt, (k.0 + l.0, k.1 + l.1)).entries;
                let omega = (k.0 * l.1 - k.1 * l.0) as f64;
                let phase = Complex64::from_polar(1.0, -PI * omega / n);
                assert!(max_abs(&(&tk * &tl - tkl * phase)) < 1e-12);
                let tmk = weyl_translation(&qt, (-k.0, -k.1)).entries;
                assert!(max_abs(&(tk.adjoint() - tmk)) < 1e-13);
                assert!(crate::linalg::unitarity_defect(&tk) < 1e-13);
            }
        }
    }

    #[test]
    fn constant_quantizes_to_identity() {
        let qt = QuantumTorus::new(6).unwrap();
        assert_eq!(quantize(&qt, &TorusSymbol::constant(1.0)).entries, CMatrix::identity(6, 6));
    }

    #[test]
    fn cosine_is_two_translations() {
        let qt = QuantumTorus::new(16).unwrap();
        let op = quantize(&qt, &TorusSymbol::cos_x());
        assert!(op.hermitian);
        let expected = (weyl_translation(&qt, (1, 0)).entries + weyl_translation(&qt, (-1, 0)).entries) * c(0.5, 0.0);
        assert!(max_abs(&(op.entries.clone() - expected)) < 1e-15);
        // multiplication operator by cos(2πx_j)
        for j in 0..16 {
            let want = (2.0 * PI * j as f64 / 16.0).cos();
            assert!((op.entries[(j, j)] - c(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn real_symbols_are_hermitian() {
        let qt = QuantumTorus::with_twist(11, [0.25, 0.5]).unwrap();
        let a = TorusSymbol::random(&mut rng(), 4, true);
        let op = quantize(&qt, &a);
        assert!(op.hermitian && op.hermitian_defect() <= 1e-14);
    }

    #[test]
    fn adjoint_rule_is_exact() {
        let mut r = rng();
        for n in [8, 32, 64] {
            let qt = QuantumTorus::new(n).unwrap();
            let a = TorusSymbol::random(&mut r, 3, false);
            let lhs = quantize(&qt, &a.conj()).entries;
            let rhs = quantize(&qt, &a).entries.adjoint();
            assert!(max_abs(&(lhs - rhs)) < 1e-13);
        }
    }

    #[test]
    fn quantize_is_linear_and_bounded() {
        let mut r = rng();
        let qt = QuantumTorus::new(24).unwrap();
        for _ in 0..10 {
            let a = TorusSymbol::random(&mut r, 3, false);
            let b = TorusSymbol::random(&mut r, 2, false);
            let s = c(0.7, -1.3);
            let lhs = quantize(&qt, &a.scale(s).add(&b)).entries;
            let rhs = quantize(&qt, &a).entries * s + quantize(&qt, &b).entries;
            assert!(op_norm_bound(&(lhs - rhs)) < 1e-13);
            assert!(op_norm(&quantize(&qt, &a).entries) <= a.l1_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bracket_of_exponentials() {
        // oracle: differentiate e_k e_l by hand:
        // ∂_ξ e_k ∂_x e_l − ∂_x e_k ∂_ξ e_l = (2πi)²(k₂l₁ − k₁l₂) e_{k+l}
        let mut r = rng();
        for _ in 0..20 {
            let k = (r.random_range(-5..5), r.random_range(-5..5));
            let l = (r.random_range(-5..5), r.random_range(-5..5));
            let got = poisson_bracket(&TorusSymbol::exponential(k), &TorusSymbol::exponential(l));
            let two_pi_i = c(0.0, 2.0 * PI);
            let want = two_pi_i * two_pi_i * ((k.1 * l.0 - k.0 * l.1) as f64);
            let sum = (k.0 + l.0, k.1 + l.1);
            assert!((got.coeff(sum) - want).norm() < 1e-12);
            assert!(got.terms().all(|(kk, _)| kk == sum));
            // closed form 4π²(k₁l₂ − k₂l₁)
            let closed = 4.0 * PI * PI * (k.0 * l.1 - k.1 * l.0) as f64;
            assert!((got.coeff(sum) - c(closed, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn product_defect_examples() {
        let qt = QuantumTorus::new(32).unwrap();
        let cx = TorusSymbol::cos_x();
        assert!(product_defect(&qt, &cx, &TorusSymbol::constant(2.5)) < 1e-13);
        assert!(product_defect(&qt, &cx, &cx) < 1e-13);
        let cxi = TorusSymbol::cos_xi();
        assert!(product_defect(&qt, &cx, &cxi) > 1e-3);
    }

    #[test]
    fn commutator_defect_vanishes_for_position_symbols() {
        let qt = QuantumTorus::new(32).unwrap();
        let a = TorusSymbol::cos_x();
        let b = TorusSymbol::from_terms([((2, 0), c(0.3, 0.1)), ((-1, 0), c(1.0, 0.0))]);
        assert!(commutator_defect(&qt, &a, &b) < 1e-13);
    }

    #[test]
    fn defect_slopes() {
        // regression oracle: log-log fits over doubling N
        let (a, b) = (TorusSymbol::cos_x(), TorusSymbol::cos_xi());
        let ns = [64usize, 128, 256, 512];
        let prod: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n as f64, product_defect(&QuantumTorus::new(n).unwrap(), &a, &b)))
            .collect();
        let comm: Vec<(f64, f64)> = ns
            .iter()
            .map(|&n| (n as f64, commutator_defect(&QuantumTorus::new(n).unwrap(), &a, &b)))
            .collect();
        let ps = crate::linalg::log_log_slope(&prod);
        let cs = crate::linalg::log_log_slope(&comm);
        assert!((ps + 1.0).abs() < 0.05, "product slope {ps}");
        assert!(cs <= -1.8, "commutator slope {cs}");
    }

    #[test]
    fn matrix_elements() {
        let qt = QuantumTorus::with_twist(10, [0.4, 0.0]).unwrap();
        let id = quantize(&qt, &TorusSymbol::constant(1.0));
        let mut e0 = CVector::zeros(10);
        e0[0] = c(1.0, 0.0);
        assert!((matrix_element(&id, &e0).unwrap() - c(1.0, 0.0)).norm() < 1e-15);

        let op = quantize(&qt, &TorusSymbol::cos_x());
        // entry (0, 0) is cos(2π θ₁ / N)
        let want = (2.0 * PI * 0.4 / 10.0).cos();
        let got = matrix_element(&op, &e0).unwrap();
        assert!((got - op.entries[(0, 0)]).norm() < 1e-15);
        assert!((got.re - want).abs() < 1e-15);

        let mut r = rng();
        let mut u = CVector::from_fn(10, |_, _| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        u /= c(u.norm(), 0.0);
        let h = quantize(&qt, &TorusSymbol::random(&mut r, 3, true));
        assert!(matrix_element(&h, &u).unwrap().im.abs() <= 1e-12);

        let not_unit = CVector::from_element(10, c(1.0, 0.0));
        assert!(matches!(matrix_element(&h, &not_unit), Err(QuantizationError::NotNormalized(_))));
    }

    #[test]
    fn expectation_matches_dense() {
        let mut r = rng();
        let qt = QuantumTorus::with_twist(13, [0.1, 0.6]).unwrap();
        let a = TorusSymbol::random(&mut r, 3, false);
        let mut u = CVector::from_fn(13, |_, _| c(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        u /= c(u.norm(), 0.0);
        let dense = matrix_element(&quantize(&qt, &a), &u).unwrap();
        assert!((expectation(&qt, &a, &u).unwrap() - dense).norm() < 1e-13);
        let moments = measure_moments(&qt, &u, &[TorusSymbol::constant(1.0)]).unwrap();
        assert!((moments[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert_eq!(TorusSymbol::cos_x().mean(), c(0.0, 0.0));
    }

    #[test]
    fn traces_vanish_off_lattice() {
        let qt = QuantumTorus::new(10).unwrap();
        for k in [(1, 0), (0, 3), (4, 7), (10, 3)] {
            assert!(weyl_translation(&qt, k).entries.trace().norm() < 1e-12);
        }
        assert!((weyl_translation(&qt, (10, 0)).entries.trace().norm() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn symbol_repr_round_trip() {
        let s = TorusSymbol::cos_x().add(&TorusSymbol::cos_xi());
        let r: SymbolRepr = s.clone().into();
        assert!(r.real);
        assert_eq!(TorusSymbol::try_from(r).unwrap(), s);

        let lopsided = SymbolRepr { terms: vec![(1, 0, 1.0, 0.0)], real: true };
        assert_eq!(TorusSymbol::try_from(lopsided), Err(QuantizationError::NotRealSymbol((1, 0))));
    }
}
