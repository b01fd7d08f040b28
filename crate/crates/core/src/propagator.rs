//! The metaplectic quantization `B_N` of a cat map.
//!
//! `B_N` is the unitary, unique up to a scalar, with the exact Egorov property
//! `B⁻¹ Op_N(a) B = Op_N(a ∘ A)`, equivalently `B⁻¹ T(k) B = T(Aᵀk)`.
//!
//! For `θ = 0` and even `N` the matrix is assembled from a word in the
//! generators `L = [[1,0],[1,1]]` and `R = [[0,1],[−1,0]]` of `SL(2, ℤ)`:
//! `Lⁿ` is quantized by the quadratic phase `diag(e^{iπnj²/N})` and `R` by the
//! unitary DFT. Any other `(N, θ)` goes through an intertwiner projection:
//! a random matrix is averaged over the two groups generated by
//! `X ↦ T(e_i) X T(Aᵀe_i)⁻¹`. Both routes end with the same certification.

use crate::dynamics::{mul_i64, CatMatrix};
use crate::linalg::{c, dft_columns, op_norm, op_norm_bound, op_norm_within, unitarity_defect, CMatrix, CVector};
use crate::quantization::{QuantumTorus, TorusSymbol};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;
use thiserror::Error;

pub const UNITARITY_TOL: f64 = 1e-11;
pub const EGOROV_TOL: f64 = 1e-10;
pub const PERIOD_TOL: f64 = 1e-8;

const PROJECTION_SEED: u64 = 0x6361_746c_6162;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("no metaplectic quantization for N = {n}, θ = {theta:?} (unitarity defect {unitarity:.3e}, Egorov defect {egorov:.3e})")]
    InadmissiblePair { n: usize, theta: [f64; 2], unitarity: f64, egorov: f64 },
    #[error("no scalar power B^k with k <= {0}")]
    NotFound(u64),
    #[error("k_max must be at least 1")]
    InvalidKMax,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

impl PropagatorError {
    pub fn code(&self) -> &'static str {
        match self {
            PropagatorError::InadmissiblePair { .. } => "INADMISSIBLE_PAIR",
            PropagatorError::NotFound(_) => "NOT_FOUND",
            PropagatorError::InvalidKMax => "INVALID_K_MAX",
            PropagatorError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
        }
    }
}

/// A letter of a word in the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    /// `Lⁿ = [[1,0],[n,1]]`.
    Shear(i64),
    /// `Rʳ` with `r ∈ {1, 2, 3}`.
    Rotation(u8),
}

impl Letter {
    fn matrix(self) -> [[i64; 2]; 2] {
        match self {
            Letter::Shear(n) => [[1, 0], [n, 1]],
            Letter::Rotation(1) => [[0, 1], [-1, 0]],
            Letter::Rotation(2) => [[-1, 0], [0, -1]],
            Letter::Rotation(_) => [[0, -1], [1, 0]],
        }
    }

    fn inverse(self) -> Letter {
        match self {
            Letter::Shear(n) => Letter::Shear(-n),
            Letter::Rotation(r) => Letter::Rotation((4 - r) % 4),
        }
    }
}

/// Writes `m` as a product of letters, left to right, with adjacent letters merged.
pub fn generator_word(m: [[i64; 2]; 2]) -> Vec<Letter> {
    let mut cur = m;
    let mut reducers = Vec::new();
    // left-multiply by shears and R until the top-left entry vanishes;
    // |a| at least halves each round
    while cur[0][0] != 0 {
        let (a, cc) = (cur[0][0] as f64, cur[1][0] as f64);
        let n = -(cc / a).round() as i64;
        for g in [Letter::Shear(n), Letter::Rotation(1)] {
            cur = mul_i64(g.matrix(), cur).expect("entries shrink during reduction");
            reducers.push(g);
        }
    }
    let d = cur[1][1];
    let tail = if cur[0][1] == 1 {
        // [[0,1],[−1,d]] = L^d R
        vec![Letter::Shear(d), Letter::Rotation(1)]
    } else {
        // [[0,−1],[1,d]] = R² L^{−d} R
        vec![Letter::Rotation(2), Letter::Shear(-d), Letter::Rotation(1)]
    };
    let letters = reducers.iter().map(|g| g.inverse()).chain(tail);
    let mut word: Vec<Letter> = Vec::new();
    for l in letters {
        match (word.last_mut(), l) {
            (Some(Letter::Shear(p)), Letter::Shear(q)) => *p += q,
            (Some(Letter::Rotation(p)), Letter::Rotation(q)) => *p = (*p + q) % 4,
            _ => word.push(l),
        }
        if matches!(word.last(), Some(Letter::Shear(0)) | Some(Letter::Rotation(0))) {
            word.pop();
        }
    }
    word
}

/// Integer product of a word.
pub fn word_product(word: &[Letter]) -> [[i64; 2]; 2] {
    word.iter()
        .fold([[1, 0], [0, 1]], |acc, l| mul_i64(acc, l.matrix()).expect("word product overflow"))
}

/// Left-multiplies every column of `x` by the quantization of `letter` (`θ = 0`, even `N`).
fn apply_letter(letter: Letter, x: &mut CMatrix) {
    let n = x.nrows();
    match letter {
        Letter::Shear(s) => {
            let modulus = 2 * n as i128;
            let phases: Vec<Complex64> = (0..n)
                .map(|j| {
                    let e = (s as i128 * (j * j) as i128).rem_euclid(modulus);
                    Complex64::from_polar(1.0, PI * e as f64 / n as f64)
                })
                .collect();
            for mut col in x.column_iter_mut() {
                for (z, p) in col.iter_mut().zip(&phases) {
                    *z *= p;
                }
            }
        }
        Letter::Rotation(1) => dft_columns(x, false),
        Letter::Rotation(3) => dft_columns(x, true),
        Letter::Rotation(_) => {
            // F² is the parity (Pu)_j = u_{−j}
            for mut col in x.column_iter_mut() {
                col.as_mut_slice()[1..].reverse();
            }
        }
    }
}

/// How the propagator was assembled.
#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    Generators(Vec<Letter>),
    Projection,
}

/// `B_N` together with its construction certificate.
#[derive(Debug, Clone)]
pub struct Propagator {
    torus: QuantumTorus,
    map: CatMatrix,
    matrix: CMatrix,
    route: Route,
    /// `B = phase · W` where `W` is the product of quantized letters.
    word_phase: Complex64,
    unitarity_defect: f64,
    egorov_generator_defect: f64,
}

/// Builds and certifies `B_N` for `A` on `qt`.
pub fn build_propagator(qt: &QuantumTorus, m: &CatMatrix) -> Result<Propagator, PropagatorError> {
    let n = qt.dim();
    let (mut matrix, route) = if qt.is_untwisted() && n % 2 == 0 {
        let word = generator_word(m.entries());
        debug_assert_eq!(word_product(&word), m.entries());
        let mut x = CMatrix::identity(n, n);
        for &l in word.iter().rev() {
            apply_letter(l, &mut x);
        }
        (x, Route::Generators(word))
    } else {
        (projected_intertwiner(qt, m)?, Route::Projection)
    };
    let word_phase = fix_phase(&mut matrix);
    let unitarity = unitarity_defect(&matrix);
    let egorov = [(1, 0), (0, 1)]
        .iter()
        .map(|&k| translation_intertwining_defect(qt, m, &matrix, k))
        .fold(0.0, f64::max);
    if !(unitarity <= UNITARITY_TOL && egorov <= EGOROV_TOL) {
        return Err(PropagatorError::InadmissiblePair { n, theta: qt.theta(), unitarity, egorov });
    }
    Ok(Propagator {
        torus: *qt,
        map: *m,
        matrix,
        route,
        word_phase,
        unitarity_defect: unitarity,
        egorov_generator_defect: egorov,
    })
}

/// `‖T(k) B − B T(Aᵀk)‖`, equal to `‖B⁻¹T(k)B − T(Aᵀk)‖` for unitary `B`.
fn translation_intertwining_defect(qt: &QuantumTorus, m: &CatMatrix, b: &CMatrix, k: (i64, i64)) -> f64 {
    let lhs = qt.translation(k).left_mul(b);
    let rhs = qt.translation(m.transpose_apply(k)).right_mul(b);
    let diff = lhs - rhs;
    op_norm_within(&diff, EGOROV_TOL).1
}

fn projected_intertwiner(qt: &QuantumTorus, m: &CatMatrix) -> Result<CMatrix, PropagatorError> {
    let n = qt.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(PROJECTION_SEED);
    let mut x = CMatrix::from_fn(n, n, |_, _| {
        c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
    });
    let start_norm = x.norm();
    for k in [(1, 0), (0, 1)] {
        let left = qt.translation(k);
        let right = qt.translation(m.transpose_apply(k));
        // average of Φᵃ(X) over a = 0..N−1, Φ(X) = T(k) X T(Aᵀk)⁻¹
        let mut term = x.clone();
        let mut sum = x.clone();
        for _ in 1..n {
            term = right.right_mul_adjoint(&left.left_mul(&term));
            sum += &term;
        }
        x = sum / c(n as f64, 0.0);
    }
    let norm = x.norm();
    if norm <= 1e-8 * start_norm {
        return Err(PropagatorError::InadmissiblePair {
            n,
            theta: qt.theta(),
            unitarity: 1.0,
            egorov: f64::INFINITY,
        });
    }
    Ok(x * c((n as f64).sqrt() / norm, 0.0))
}

/// Rotates the global phase so the first row-major entry of maximal modulus
/// is positive real; returns the factor applied.
fn fix_phase(b: &mut CMatrix) -> Complex64 {
    let max = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (rows, cols) = b.shape();
    let threshold = max * (1.0 - 1e-9);
    let pivot = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .map(|(i, j)| b[(i, j)])
        .find(|z| z.norm() >= threshold)
        .unwrap_or(c(1.0, 0.0));
    let factor = pivot.conj() / pivot.norm();
    *b *= factor;
    factor
}

impl Propagator {
    pub fn torus(&self) -> &QuantumTorus {
        &self.torus
    }

    pub fn map(&self) -> &CatMatrix {
        &self.map
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn dim(&self) -> usize {
        self.torus.dim()
    }

    /// `‖B*B − I‖` measured at construction.
    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    /// Largest Egorov defect over `e_(1,0)` and `e_(0,1)` measured at construction.
    pub fn certified_egorov_defect(&self) -> f64 {
        self.egorov_generator_defect
    }

    /// `B · X`, through the generator word when available.
    pub fn left_apply(&self, x: &CMatrix) -> CMatrix {
        match &self.route {
            Route::Generators(word) => {
                let mut y = x.clone();
                for &l in word.iter().rev() {
                    apply_letter(l, &mut y);
                }
                y * self.word_phase
            }
            Route::Projection => &self.matrix * x,
        }
    }

    /// `B^t u`; negative `t` uses `B*`.
    pub fn evolve(&self, u: &CVector, t: i64) -> Result<CVector, PropagatorError> {
        if u.len() != self.dim() {
            return Err(PropagatorError::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        let mut v = u.clone();
        if t >= 0 {
            for _ in 0..t {
                v = &self.matrix * v;
            }
        } else {
            let adj = self.matrix.adjoint();
            for _ in 0..-t {
                v = &adj * v;
            }
        }
        Ok(v)
    }

    /// `B^k` for `k ≥ 0`.
    pub fn power(&self, k: u64) -> CMatrix {
        let n = self.dim();
        let mut p = CMatrix::identity(n, n);
        for _ in 0..k {
            p = self.left_apply(&p);
        }
        p
    }

    /// `‖B⁻¹ Op_N(a) B − Op_N(a ∘ A)‖`.
    pub fn egorov_defect(&self, a: &TorusSymbol) -> f64 {
        let n = self.dim();
        // ‖Op(a) B − B Op(a∘A)‖, the same norm by unitarity
        let mut diff = CMatrix::zeros(n, n);
        for (k, v) in a.terms() {
            let lhs = self.torus.translation(k).left_mul(&self.matrix);
            let rhs = self.torus.translation(self.map.transpose_apply(k)).right_mul(&self.matrix);
            diff += (lhs - rhs) * v;
        }
        if op_norm_bound(&diff) == 0.0 {
            return 0.0;
        }
        op_norm(&diff)
    }

    /// Least `k ≤ k_max` with `B^k` a unit scalar (to [`PERIOD_TOL`]), and that scalar.
    pub fn quantum_period(&self, k_max: u64) -> Result<(u64, Complex64), PropagatorError> {
        if k_max == 0 {
            return Err(PropagatorError::InvalidKMax);
        }
        let n = self.dim();
        let id = CMatrix::identity(n, n);
        let mut p = id.clone();
        for k in 1..=k_max {
            p = self.left_apply(&p);
            let tr = p.trace() / c(n as f64, 0.0);
            if tr.norm() < 0.5 {
                continue;
            }
            let phase = tr / tr.norm();
            let (ok, _) = op_norm_within(&(&p - &id * phase), PERIOD_TOL);
            if ok {
                return Ok((k, phase));
            }
        }
        Err(PropagatorError::NotFound(k_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dft_matrix;
    use crate::quantization::{quantize, weyl_translation};
    use proptest::prelude::*;
    use rand::Rng;

    fn arnold() -> CatMatrix {
        CatMatrix::arnold()
    }

    /// Dense reference quantization of a letter, built entry by entry.
    fn letter_oracle(l: Letter, n: usize) -> CMatrix {
        match l {
            Letter::Shear(s) => CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::from_polar(1.0, PI * s as f64 * (i * i) as f64 / n as f64)
                } else {
                    c(0.0, 0.0)
                }
            }),
            Letter::Rotation(r) => {
                let f = dft_matrix(n);
                let mut p = CMatrix::identity(n, n);
                for _ in 0..r {
                    p = &f * p;
                }
                p
            }
        }
    }

    #[test]
    fn letters_match_dense_oracle() {
        let n = 10;
        for l in [Letter::Shear(3), Letter::Shear(-7), Letter::Rotation(1), Letter::Rotation(2), Letter::Rotation(3)] {
            let mut x = CMatrix::identity(n, n);
            apply_letter(l, &mut x);
            assert!((x - letter_oracle(l, n)).norm() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn letters_satisfy_egorov() {
        for n in [6, 10, 16] {
            let qt = QuantumTorus::new(n).unwrap();
            for l in [Letter::Shear(1), Letter::Shear(-3), Letter::Rotation(1), Letter::Rotation(3)] {
                let b = letter_oracle(l, n);
                let mt = l.matrix();
                for k in [(1, 0), (0, 1), (2, -3)] {
                    let akt = (mt[0][0] * k.0 + mt[1][0] * k.1, mt[0][1] * k.0 + mt[1][1] * k.1);
                    let lhs = b.adjoint() * weyl_translation(&qt, k).entries * &b;
                    let rhs = weyl_translation(&qt, akt).entries;
                    assert!((lhs - rhs).norm() < 1e-11, "{l:?} {k:?}");
                }
            }
        }
    }

    #[test]
    fn words_multiply_back() {
        for m in [[[2, 1], [1, 1]], [[1, 1], [1, 2]], [[5, 8], [3, 5]], [[-3, 1], [-1, 0]], [[0, 1], [-1, 3]], [[7, -2], [-3, 1]]] {
            let w = generator_word(m);
            assert_eq!(word_product(&w), m, "{w:?}");
        }
    }

    #[test]
    fn arnold_small_n() {
        let qt = QuantumTorus::new(10).unwrap();
        let p = build_propagator(&qt, &arnold()).unwrap();
        assert!(p.unitarity_defect() <= 1e-12);
        assert!(p.certified_egorov_defect() <= 1e-11);
        assert!(p.egorov_defect(&TorusSymbol::exponential((1, 0))) <= 1e-11);
        assert_eq!(p.egorov_defect(&TorusSymbol::constant(1.0)), 0.0);
        let b = p.matrix();
        let pivot = b.iter().find(|z| z.norm() > 1e-12).copied().unwrap();
        assert!(pivot.im.abs() < 1e-15 && pivot.re > 0.0);
    }

    #[test]
    fn random_symbols_satisfy_egorov() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let qt = QuantumTorus::new(128).unwrap();
        let p = build_propagator(&qt, &arnold()).unwrap();
        for _ in 0..3 {
            let a = TorusSymbol::random(&mut rng, 5, false);
            assert!(p.egorov_defect(&a) <= 1e-10);
        }
        // direct dense evaluation agrees
        let a = TorusSymbol::random(&mut rng, 3, true);
        let b = p.matrix();
        let lhs = b.adjoint() * quantize(&qt, &a).entries * b;
        let rhs = quantize(&qt, &a.pullback(&arnold())).entries;
        assert!(op_norm(&(lhs - rhs)) <= 1e-10);
    }

    #[test]
    fn projection_agrees_with_generators() {
        for (n, m) in [(8, arnold()), (12, CatMatrix::new([[1, 1], [1, 2]]).unwrap()), (10, CatMatrix::new([[3, 2], [4, 3]]).unwrap())] {
            let qt = QuantumTorus::new(n).unwrap();
            let direct = build_propagator(&qt, &m).unwrap();
            let mut projected = projected_intertwiner(&qt, &m).unwrap();
            fix_phase(&mut projected);
            assert!((direct.matrix() - projected).norm() < 1e-10, "N = {n}");
        }
    }

    #[test]
    fn odd_dimension_some_twist_is_admissible() {
        let m = arnold();
        let mut found = Vec::new();
        for theta in [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]] {
            let qt = QuantumTorus::with_twist(9, theta).unwrap();
            match build_propagator(&qt, &m) {
                Ok(p) => {
                    assert!(p.unitarity_defect() <= UNITARITY_TOL);
                    assert_eq!(p.route(), &Route::Projection);
                    found.push(theta);
                }
                Err(e) => assert_eq!(e.code(), "INADMISSIBLE_PAIR"),
            }
        }
        assert!(!found.is_empty());
    }

    #[test]
    fn twisted_even_dimension_rejected_when_inconsistent() {
        // θ = (½, ½) and θ = 0 cannot both be fixed by a map that mixes the
        // twist components; at least one of the four twists must fail
        let m = arnold();
        let results: Vec<bool> = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]]
            .iter()
            .map(|&t| build_propagator(&QuantumTorus::with_twist(8, t).unwrap(), &m).is_ok())
            .collect();
        assert!(results[0]);
        assert!(results.iter().any(|ok| !ok));
    }

    #[test]
    fn evolve_and_period() {
        let qt = QuantumTorus::new(20).unwrap();
        let p = build_propagator(&qt, &arnold()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = CVector::from_fn(20, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>()));
        u /= c(u.norm(), 0.0);
        assert_eq!(p.evolve(&u, 0).unwrap(), u);
        let v = p.evolve(&u, 7).unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-11);
        assert!((p.evolve(&v, -7).unwrap() - &u).norm() < 1e-11);
        let (k, phase) = p.quantum_period(200).unwrap();
        let w = p.evolve(&u, k as i64).unwrap();
        assert!((w - u * phase).norm() < 1e-9);
        assert!((&p.power(3) - p.matrix() * p.matrix() * p.matrix()).norm() < 1e-10);
    }

    #[test]
    fn period_not_found_and_k_max() {
        let p = build_propagator(&QuantumTorus::new(100).unwrap(), &arnold()).unwrap();
        assert_eq!(p.quantum_period(25).unwrap_err(), PropagatorError::NotFound(25));
        assert_eq!(p.quantum_period(0).unwrap_err(), PropagatorError::InvalidKMax);
    }

    #[test]
    fn cocycle() {
        let qt = QuantumTorus::new(24).unwrap();
        let a = arnold();
        let b1 = build_propagator(&qt, &a).unwrap();
        let b2 = build_propagator(&qt, &a.checked_mul(&a).unwrap()).unwrap();
        let sq = b1.matrix() * b1.matrix();
        let overlap = sq.iter().zip(b2.matrix().iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>();
        let phase = overlap / overlap.norm();
        assert!(op_norm(&(b2.matrix() - sq * phase)) <= 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn egorov_for_random_maps(p in 1i64..4, q in 1i64..4, half_n in 2usize..20, seed in 0u64..1000) {
            let m = CatMatrix::new([[1 + p * q, p], [q, 1]]).unwrap();
            let qt = QuantumTorus::new(2 * half_n).unwrap();
            let prop = build_propagator(&qt, &m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = TorusSymbol::random(&mut rng, 3, false);
            prop_assert!(prop.egorov_defect(&a) <= 1e-9);
        }
    }
}
