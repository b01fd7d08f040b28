//! Discrete fractal uncertainty experiments.
//!
//! Sets live in `ℤ_N` and are identified with the points `X/N ⊂ [0, 1)`.
//! A set is `ν`-porous up to scale `1/N` when every tested interval
//! `I ⊂ [0, 1]` of length at least `1/N` contains an open subinterval of
//! length `ν|I|` free of points. Gaps are measured between consecutive points
//! of `I ∩ X/N` and from the ends of `I` to its outermost points.

use crate::dynamics::{ehrenfest_steps, survives, wrap_unit, CatMatrix, HoleRegion, HyperbolicData, OrbitDirection};
use crate::linalg::{linear_fit, CMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FupError {
    #[error("bad digit alphabet: {0}")]
    BadAlphabet(String),
    #[error("index {index} out of range for modulus {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("moduli differ: {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("need at least 3 rows with positive norms, got {0}")]
    InsufficientData(usize),
    #[error("porosity parameter must lie in (0, 1), got {0}")]
    InvalidNu(f64),
    #[error("Cantor set size overflows")]
    Overflow,
}

impl FupError {
    pub fn code(&self) -> &'static str {
        match self {
            FupError::BadAlphabet(_) => "BAD_ALPHABET",
            FupError::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            FupError::ZeroModulus => "ZERO_MODULUS",
            FupError::DimensionMismatch(..) => "DIMENSION_MISMATCH",
            FupError::InsufficientData(_) => "INSUFFICIENT_DATA",
            FupError::InvalidNu(_) => "INVALID_NU",
            FupError::Overflow => "OVERFLOW",
        }
    }
}

/// Sorted distinct residues in `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    n: usize,
    indices: Vec<usize>,
}

impl IndexSet {
    /// Sorts and deduplicates `indices`; each must be below `n`.
    pub fn new(n: usize, mut indices: Vec<usize>) -> Result<Self, FupError> {
        if n == 0 {
            return Err(FupError::ZeroModulus);
        }
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(FupError::IndexOutOfRange { index, n });
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(IndexSet { n, indices })
    }

    pub fn full(n: usize) -> Result<Self, FupError> {
        IndexSet::new(n, (0..n).collect())
    }

    pub fn modulus(&self) -> usize {
        self.n
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Indices in `[0, M^k)` whose `k` base-`M` digits all lie in `digits`.
pub fn cantor_set(base: usize, digits: &[usize], levels: u32) -> Result<IndexSet, FupError> {
    if base < 3 {
        return Err(FupError::BadAlphabet(format!("base {base} must be at least 3")));
    }
    let mut alphabet = digits.to_vec();
    alphabet.sort_unstable();
    alphabet.dedup();
    if alphabet.len() != digits.len() || alphabet.is_empty() || alphabet.len() >= base {
        return Err(FupError::BadAlphabet(format!("need 1 <= |D| < {base} distinct digits, got {digits:?}")));
    }
    if let Some(d) = alphabet.iter().find(|&&d| d >= base) {
        return Err(FupError::BadAlphabet(format!("digit {d} not below base {base}")));
    }
    if levels == 0 {
        return Err(FupError::BadAlphabet("levels must be at least 1".into()));
    }
    let n = base.checked_pow(levels).ok_or(FupError::Overflow)?;
    let mut indices = vec![0usize];
    for _ in 0..levels {
        indices = indices.iter().flat_map(|&i| alphabet.iter().map(move |&d| i * base + d)).collect();
    }
    IndexSet::new(n, indices)
}

/// Which intervals the porosity test scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntervalFamily {
    /// Every `[p/N, (p+ℓ)/N]` with `1 ≤ ℓ ≤ N − p`; `O(N²)` intervals.
    Exhaustive,
    /// Every dyadic `[k2^{−m}, (k+1)2^{−m}]` with `2^{−m} ≥ 1/N`; `O(N)` intervals.
    Dyadic,
}

/// Range-maximum table over the gaps between consecutive points.
struct GapIndex<'a> {
    points: &'a [usize],
    table: Vec<Vec<usize>>,
}

impl<'a> GapIndex<'a> {
    fn new(points: &'a [usize]) -> Self {
        let diffs: Vec<usize> = points.windows(2).map(|w| w[1] - w[0]).collect();
        let mut table = vec![diffs];
        let mut width = 1;
        while 2 * width <= table[0].len() {
            let prev = table.last().unwrap();
            let next: Vec<usize> = (0..prev.len() - width).map(|i| prev[i].max(prev[i + width])).collect();
            table.push(next);
            width *= 2;
        }
        GapIndex { points, table }
    }

    /// Largest gap between consecutive points of ranks `lo..=hi`.
    fn max_diff(&self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            return 0;
        }
        let len = hi - lo;
        let level = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let row = &self.table[level];
        row[lo].max(row[hi - (1 << level)])
    }

    /// Largest point-free open subinterval of `[a, b]`, in units of `1/N`.
    fn gap(&self, a: f64, b: f64) -> f64 {
        let first = self.points.partition_point(|&x| (x as f64) < a);
        let end = self.points.partition_point(|&x| (x as f64) <= b);
        if first >= end {
            return b - a;
        }
        let inner = self.max_diff(first, end - 1) as f64;
        let left = self.points[first] as f64 - a;
        let right = b - self.points[end - 1] as f64;
        inner.max(left).max(right)
    }
}

/// The interval attaining the smallest gap ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorosityBound {
    /// `min_I (largest gap in I)/|I|` over the tested intervals.
    pub nu_star: f64,
    /// Minimizing interval in `[0, 1]`; `None` for the empty set.
    pub interval: Option<(f64, f64)>,
}

/// Exact best porosity constant of `set` over the given interval family.
pub fn max_porosity(set: &IndexSet, family: IntervalFamily) -> PorosityBound {
    if set.is_empty() {
        return PorosityBound { nu_star: 1.0, interval: None };
    }
    let n = set.modulus();
    let nf = n as f64;
    let gaps = GapIndex::new(set.indices());
    let mut best = (f64::INFINITY, (0.0, 1.0));
    let mut consider = |a: f64, b: f64| {
        let ratio = gaps.gap(a, b) / (b - a);
        if ratio < best.0 {
            best = (ratio, (a / nf, b / nf));
        }
    };
    match family {
        IntervalFamily::Exhaustive => {
            for len in (1..=n).rev() {
                for start in 0..=(n - len) {
                    consider(start as f64, (start + len) as f64);
                }
            }
        }
        IntervalFamily::Dyadic => {
            let mut pieces = 1usize;
            while pieces <= n {
                let len = nf / pieces as f64;
                for k in 0..pieces {
                    consider(k as f64 * len, (k + 1) as f64 * len);
                }
                pieces *= 2;
            }
        }
    }
    PorosityBound { nu_star: best.0, interval: Some(best.1) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorosityReport {
    pub nu: f64,
    /// Smallest tested length, `1/N`.
    pub scale: f64,
    pub holds: bool,
    /// An interval without a gap of relative length `ν`, when the check fails.
    pub witness_interval: Option<(f64, f64)>,
    /// Largest `ν` for which the check passes.
    pub max_nu: f64,
}

/// Whether `set/N` is `ν`-porous up to scale `1/N` on the interval family.
pub fn porosity_check(set: &IndexSet, nu: f64, family: IntervalFamily) -> Result<PorosityReport, FupError> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(FupError::InvalidNu(nu));
    }
    let bound = max_porosity(set, family);
    let holds = nu <= bound.nu_star + 1e-12;
    Ok(PorosityReport {
        nu,
        scale: 1.0 / set.modulus() as f64,
        holds,
        witness_interval: if holds { None } else { bound.interval },
        max_nu: bound.nu_star,
    })
}

/// Rows `X` and columns `Y` of the unitary DFT `F[j,k] = N^{−1/2}e^{−2πijk/N}`.
pub fn dft_submatrix(x: &IndexSet, y: &IndexSet) -> Result<CMatrix, FupError> {
    if x.modulus() != y.modulus() {
        return Err(FupError::DimensionMismatch(x.modulus(), y.modulus()));
    }
    let n = x.modulus();
    let s = 1.0 / (n as f64).sqrt();
    Ok(CMatrix::from_fn(x.len(), y.len(), |r, col| {
        let jk = (x.indices()[r] as u128 * y.indices()[col] as u128 % n as u128) as f64;
        Complex64::from_polar(s, -2.0 * PI * jk / n as f64)
    }))
}

/// `‖1_X F_N 1_Y‖`, the largest singular value of the DFT submatrix.
pub fn fup_norm(x: &IndexSet, y: &IndexSet) -> Result<f64, FupError> {
    let s = dft_submatrix(x, y)?;
    Ok(largest_singular_value(&s))
}

/// Square root of the top eigenvalue of the smaller Gram matrix.
fn largest_singular_value(s: &CMatrix) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let gram = if s.nrows() <= s.ncols() { s * s.adjoint() } else { s.adjoint() * s };
    let top = gram.symmetric_eigenvalues().max();
    top.max(0.0).sqrt()
}

/// `min(1, (|X||Y|/N)^{1/2})`.
pub fn volume_bound(x_size: usize, y_size: usize, n: usize) -> f64 {
    ((x_size * y_size) as f64 / n as f64).sqrt().min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FupRow {
    pub n: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub norm: f64,
    pub volume_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaFit {
    pub beta: f64,
    pub c: f64,
    /// RMS residual of the fit in `log norm`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FupCurve {
    pub rows: Vec<FupRow>,
    pub fit: BetaFit,
    /// Decay exponent of the volume bound over the same rows; a fitted `β`
    /// above it is decay beyond counting.
    pub volume_exponent: f64,
}

/// Least squares `log norm = log C − β log N`.
pub fn estimate_beta(points: &[(f64, f64)]) -> Result<BetaFit, FupError> {
    if points.len() < 3 || points.iter().any(|&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(FupError::InsufficientData(points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).count()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, v)| (n.ln(), v.ln())).collect();
    let (slope, intercept, residual) = linear_fit(&logs);
    Ok(BetaFit { beta: -slope, c: intercept.exp(), residual })
}

/// Norms and fit for a family of `(X, Y)` pairs.
pub fn fup_curve(pairs: &[(IndexSet, IndexSet)]) -> Result<FupCurve, FupError> {
    let rows: Result<Vec<FupRow>, FupError> = pairs
        .par_iter()
        .map(|(x, y)| {
            Ok(FupRow {
                n: x.modulus(),
                x_size: x.len(),
                y_size: y.len(),
                norm: fup_norm(x, y)?,
                volume_bound: volume_bound(x.len(), y.len(), x.modulus()),
            })
        })
        .collect();
    let rows = rows?;
    let fit = estimate_beta(&rows.iter().map(|r| (r.n as f64, r.norm)).collect::<Vec<_>>())?;
    let volume: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.volume_bound)).collect();
    let volume_exponent = -linear_fit(&volume.iter().map(|&(n, v)| (n.ln(), v.ln())).collect::<Vec<_>>()).0;
    Ok(FupCurve { rows, fit, volume_exponent })
}

/// Norm of rows `X` and columns `Y` of the 2-D DFT `F_N ⊗ F_N` on `ℤ_N²`.
pub fn fup_norm_2d(x: &[(usize, usize)], y: &[(usize, usize)], n: usize) -> Result<f64, FupError> {
    if n == 0 {
        return Err(FupError::ZeroModulus);
    }
    if let Some(&(a, b)) = x.iter().chain(y).find(|&&(a, b)| a >= n || b >= n) {
        return Err(FupError::IndexOutOfRange { index: a.max(b), n });
    }
    let nn = n as u128;
    let s = CMatrix::from_fn(x.len(), y.len(), |r, col| {
        let (x1, x2) = x[r];
        let (y1, y2) = y[col];
        let phase = (x1 as u128 * y1 as u128 + x2 as u128 * y2 as u128) % nn;
        Complex64::from_polar(1.0 / n as f64, -2.0 * PI * phase as f64 / n as f64)
    });
    Ok(largest_singular_value(&s))
}

/// The product sets `[0, h/10] × [0, 1]` and `[0, 1] × [0, h/10]` on the
/// `N × N` grid (strips one cell wide), and their 2-D norm.
pub fn product_counterexample(n: usize) -> Result<f64, FupError> {
    // a strip of width N·(1/10)·h = 1/10 sample rounds up to one sample
    let width = 1;
    let x: Vec<(usize, usize)> = (0..width).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let y: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..width).map(move |b| (a, b))).collect();
    fup_norm_2d(&x, &y, n)
}

/// `Ω₊` collects points whose backward orbit avoids the hole, `Ω₋` forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaSet {
    Plus,
    Minus,
}

impl OmegaSet {
    fn direction(self) -> OrbitDirection {
        match self {
            OmegaSet::Plus => OrbitDirection::Backward,
            OmegaSet::Minus => OrbitDirection::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineDirection {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEntry {
    pub set: OmegaSet,
    pub direction: LineDirection,
    /// Smallest porosity constant over the sections that meet `Ω`; 1 if none do.
    pub nu: f64,
    pub mean_nu: f64,
    /// Sections with no sample in `Ω`, left out of `nu` and `mean_nu`.
    pub empty_sections: usize,
    /// Section index and interval (arclength in `[0, 1]`) attaining `nu`.
    pub witness: Option<(usize, (f64, f64))>,
    pub survivor_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub n: usize,
    pub steps: usize,
    pub sections: usize,
    pub entries: Vec<OmegaEntry>,
}

impl OmegaReport {
    pub fn entry(&self, set: OmegaSet, direction: LineDirection) -> &OmegaEntry {
        self.entries.iter().find(|e| e.set == set && e.direction == direction).expect("all four entries present")
    }
}

/// Base point of section `s`: the additive recurrence with the plastic-number
/// frequencies, a low-discrepancy sequence in the square.
pub fn section_base(s: usize) -> [f64; 2] {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_2;
    [wrap_unit(0.5 + A1 * s as f64), wrap_unit(0.5 + A2 * s as f64)]
}

/// Samples of a unit-arclength segment at spacing `1/N` that lie in `Ω`.
pub fn omega_section(
    m: &CatMatrix,
    hole: &HoleRegion,
    set: OmegaSet,
    base: [f64; 2],
    dir: [f64; 2],
    n: usize,
    steps: usize,
) -> IndexSet {
    let indices: Vec<usize> = (0..n)
        .filter(|&i| {
            let t = i as f64 / n as f64;
            let p = [wrap_unit(base[0] + t * dir[0]), wrap_unit(base[1] + t * dir[1])];
            survives(m, hole, p, steps, set.direction())
        })
        .collect();
    IndexSet::new(n, indices).expect("section indices below n")
}

/// Porosity of `Ω±(N)` along stable and unstable lines, with `T = ⌊log N / log |λ₊|⌋`
/// and `sections` segments per direction tested on dyadic intervals.
pub fn omega_porosity(m: &CatMatrix, hole: &HoleRegion, n: usize, sections: usize) -> OmegaReport {
    assert!(n >= 2 && sections >= 1, "need N >= 2 and at least one section");
    let steps = ehrenfest_steps(m, n);
    let hd = HyperbolicData::of(m);
    let combos = [
        (OmegaSet::Plus, LineDirection::Stable),
        (OmegaSet::Plus, LineDirection::Unstable),
        (OmegaSet::Minus, LineDirection::Stable),
        (OmegaSet::Minus, LineDirection::Unstable),
    ];
    let entries = combos
        .iter()
        .map(|&(set, direction)| {
            let dir = match direction {
                LineDirection::Stable => hd.stable_dir,
                LineDirection::Unstable => hd.unstable_dir,
            };
            let results: Vec<(PorosityBound, usize)> = (0..sections)
                .into_par_iter()
                .map(|s| {
                    let section = omega_section(m, hole, set, section_base(s), dir, n, steps);
                    (max_porosity(&section, IntervalFamily::Dyadic), section.len())
                })
                .collect();
            let occupied: Vec<(usize, PorosityBound)> =
                results.iter().enumerate().filter(|(_, r)| r.1 > 0).map(|(s, r)| (s, r.0)).collect();
            let worst = occupied.iter().copied().reduce(|acc, x| if x.1.nu_star < acc.1.nu_star { x } else { acc });
            OmegaEntry {
                set,
                direction,
                nu: worst.map_or(1.0, |w| w.1.nu_star),
                mean_nu: if occupied.is_empty() {
                    1.0
                } else {
                    occupied.iter().map(|(_, b)| b.nu_star).sum::<f64>() / occupied.len() as f64
                },
                empty_sections: sections - occupied.len(),
                witness: worst.and_then(|(s, b)| b.interval.map(|iv| (s, iv))),
                survivor_fraction: results.iter().map(|r| r.1).sum::<usize>() as f64 / (sections * n) as f64,
            }
        })
        .collect();
    OmegaReport { n, steps, sections, entries }
}
