//! Eigen-analysis of `B_N`: spectra, quantum ergodicity statistics, scarred
//! states and phase-space mass diagnostics.

use crate::dynamics::{CatMatrix, HoleRegion, PeriodicOrbit};
use crate::linalg::{c, log_log_slope, op_norm_within, CMatrix, CVector};
use crate::phase_space::{
    coherent_entries, coherent_state, default_grid, default_sigma, husimi, torus_distance, CoherentSpec, PhaseSpaceError,
};
use crate::propagator::{build_propagator, Propagator, PropagatorError};
use crate::quantization::{check_normalized, QuantizationError, QuantumTorus, TorusSymbol};
use nalgebra::linalg::Schur;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

pub const RESIDUAL_TOL: f64 = 1e-9;
pub const ORTHONORMALITY_TOL: f64 = 1e-10;
pub const SCAR_RESIDUAL_TOL: f64 = 1e-8;

const RETRY_SEED: u64 = 0x7370_6563;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("eigendecomposition did not converge (residual {residual:.3e}, orthonormality defect {orthonormality:.3e})")]
    ConvergenceFailure { residual: f64, orthonormality: f64 },
    #[error("no scalar power of B up to k = {0}")]
    PeriodNotScalar(u64),
    #[error("branch {branch} projects the coherent state to zero")]
    DegenerateProjection { branch: u64 },
    #[error("branch {branch} out of range for quantum period {period}")]
    InvalidBranch { branch: u64, period: u64 },
    #[error("radius {0} must lie in (0, 0.25)")]
    InvalidRadius(f64),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Quantization(#[from] QuantizationError),
    #[error(transparent)]
    PhaseSpace(#[from] PhaseSpaceError),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
}

impl SpectralError {
    pub fn code(&self) -> &'static str {
        match self {
            SpectralError::ConvergenceFailure { .. } => "CONVERGENCE_FAILURE",
            SpectralError::PeriodNotScalar(_) => "PERIOD_NOT_SCALAR",
            SpectralError::DegenerateProjection { .. } => "DEGENERATE_PROJECTION",
            SpectralError::InvalidBranch { .. } => "INVALID_BRANCH",
            SpectralError::InvalidRadius(_) => "INVALID_RADIUS",
            SpectralError::EmptyInput(_) => "EMPTY_INPUT",
            SpectralError::Quantization(e) => e.code(),
            SpectralError::PhaseSpace(e) => e.code(),
            SpectralError::Propagator(e) => e.code(),
        }
    }

    /// Whether the failure is numerical rather than a domain violation.
    pub fn is_numerical(&self) -> bool {
        matches!(self, SpectralError::ConvergenceFailure { .. } | SpectralError::DegenerateProjection { .. })
    }
}

/// Eigenphases in `[0, 2π)` sorted ascending, with matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenphases: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// `max_j ‖B v_j − e^{iφ_j} v_j‖`.
    pub residual: f64,
    /// `‖V*V − I‖`.
    pub orthonormality_defect: f64,
    /// Index groups of eigenphases within `tolerance` of a neighbour, circularly.
    pub clusters: Vec<Vec<usize>>,
    pub tolerance: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenphases.len()
    }

    pub fn eigenvector(&self, j: usize) -> CVector {
        self.eigenvectors.column(j).into_owned()
    }
}

/// Default degeneracy tolerance `1e−8 · N`.
pub fn default_cluster_tolerance(n: usize) -> f64 {
    1e-8 * n as f64
}

/// Full eigendecomposition of `B` through the complex Schur form.
pub fn decompose(p: &Propagator) -> Result<SpectralDecomposition, SpectralError> {
    decompose_with_tolerance(p, default_cluster_tolerance(p.dim()))
}

pub fn decompose_with_tolerance(p: &Propagator, tolerance: f64) -> Result<SpectralDecomposition, SpectralError> {
    let b = p.matrix();
    match schur_eigen(b, None) {
        Ok(d) => Ok(finish(d, tolerance)),
        Err(_) => {
            // one retry after a random unitary similarity
            let w = random_unitary(b.nrows(), RETRY_SEED);
            schur_eigen(b, Some(&w)).map(|d| finish(d, tolerance))
        }
    }
}

struct RawEigen {
    phases: Vec<f64>,
    vectors: CMatrix,
    residual: f64,
    orthonormality: f64,
}

fn schur_eigen(b: &CMatrix, conjugator: Option<&CMatrix>) -> Result<RawEigen, SpectralError> {
    let n = b.nrows();
    let target = match conjugator {
        Some(w) => w.adjoint() * b * w,
        None => b.clone(),
    };
    let fail = SpectralError::ConvergenceFailure { residual: f64::INFINITY, orthonormality: f64::INFINITY };
    let schur = Schur::try_new(target, f64::EPSILON, 0).ok_or(fail)?;
    let (q, t) = schur.unpack();
    let q = match conjugator {
        Some(w) => w * q,
        None => q,
    };
    // B normal, so the triangular factor is diagonal up to rounding
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (t[(j, j)].arg().rem_euclid(TAU) % TAU, j)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let phases: Vec<f64> = order.iter().map(|&(ph, _)| ph).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| q[(i, order[j].1)]);
    let bv = b * &vectors;
    let residual = (0..n)
        .into_par_iter()
        .map(|j| {
            let lambda = Complex64::from_polar(1.0, phases[j]);
            (bv.column(j) - vectors.column(j) * lambda).norm()
        })
        .reduce(|| 0.0, f64::max);
    let gram = vectors.adjoint() * &vectors - CMatrix::identity(n, n);
    let orthonormality = op_norm_within(&gram, ORTHONORMALITY_TOL).1;
    if residual <= RESIDUAL_TOL && orthonormality <= ORTHONORMALITY_TOL {
        Ok(RawEigen { phases, vectors, residual, orthonormality })
    } else {
        Err(SpectralError::ConvergenceFailure { residual, orthonormality })
    }
}

fn finish(raw: RawEigen, tolerance: f64) -> SpectralDecomposition {
    let clusters = cluster_phases(&raw.phases, tolerance);
    SpectralDecomposition {
        eigenphases: raw.phases,
        eigenvectors: raw.vectors,
        residual: raw.residual,
        orthonormality_defect: raw.orthonormality,
        clusters,
        tolerance,
    }
}

/// Haar-like unitary from the QR factorization of a seeded Gaussian matrix.
fn random_unitary(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(n, n, |_, _| c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)));
    g.qr().q()
}

/// Groups sorted phases whose circular gap to a neighbour is at most `tol`.
pub fn cluster_phases(sorted: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (j, &ph) in sorted.iter().enumerate() {
        match clusters.last_mut() {
            Some(last) if ph - sorted[*last.last().unwrap()] <= tol => last.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    if clusters.len() > 1 {
        let wrap_gap = sorted[0] + TAU - sorted[sorted.len() - 1];
        if wrap_gap <= tol {
            let first = clusters.remove(0);
            clusters.last_mut().unwrap().extend(first);
        }
    }
    clusters
}

/// `⟨Op_N(a) v_j, v_j⟩` for every column of `vectors`.
pub fn diagonal_elements(qt: &QuantumTorus, a: &TorusSymbol, vectors: &CMatrix) -> Vec<Complex64> {
    let (n, cols) = vectors.shape();
    let mut applied = CMatrix::zeros(n, cols);
    for (k, v) in a.terms() {
        applied += qt.translation(k).left_mul(vectors) * v;
    }
    (0..cols).map(|j| vectors.column(j).dotc(&applied.column(j))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QERow {
    pub n: usize,
    /// `(1/N) Σ_j |⟨Op_N(a)u_j, u_j⟩ − ∫a|²`.
    pub variance: f64,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QEReport {
    pub symbol: String,
    pub mean: f64,
    pub rows: Vec<QERow>,
    /// Fitted log-log slope of the variance; `None` with fewer than two positive rows.
    pub slope: Option<f64>,
}

/// Matrix element statistics of a real symbol over full eigenbases, one row per `N`.
pub fn qe_variance(m: &CatMatrix, a: &TorusSymbol, label: &str, ns: &[usize]) -> Result<QEReport, SpectralError> {
    if ns.is_empty() {
        return Err(SpectralError::EmptyInput("no dimensions given"));
    }
    let mean = a.mean().re;
    let rows: Result<Vec<QERow>, SpectralError> = ns
        .par_iter()
        .map(|&n| {
            let qt = QuantumTorus::new(n)?;
            let p = build_propagator(&qt, m)?;
            let d = decompose(&p)?;
            Ok(qe_row(&qt, a, &d))
        })
        .collect();
    let rows = rows?;
    let positive: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.variance > 0.0).map(|r| (r.n as f64, r.variance)).collect();
    let slope = (positive.len() >= 2).then(|| log_log_slope(&positive));
    Ok(QEReport { symbol: label.to_string(), mean, rows, slope })
}

pub fn qe_row(qt: &QuantumTorus, a: &TorusSymbol, d: &SpectralDecomposition) -> QERow {
    let mean = a.mean();
    let devs: Vec<f64> = diagonal_elements(qt, a, &d.eigenvectors).iter().map(|z| (z - mean).norm()).collect();
    let n = devs.len();
    QERow {
        n: qt.dim(),
        variance: devs.iter().map(|x| x * x).sum::<f64>() / n as f64,
        max_deviation: devs.iter().copied().fold(0.0, f64::max),
    }
}

/// Husimi mass of a state near a periodic orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitMass {
    pub radius: f64,
    pub mass: f64,
    /// Lebesgue measure of the union of balls on the same grid.
    pub baseline: f64,
}

/// Husimi mass of `u` in the union of `r`-balls around `points`, on the
/// default grid for `σ = √h`.
pub fn orbit_mass(qt: &QuantumTorus, u: &CVector, points: &[[f64; 2]], r: f64) -> Result<OrbitMass, SpectralError> {
    if !(r > 0.0 && r < 0.25) {
        return Err(SpectralError::InvalidRadius(r));
    }
    if points.is_empty() {
        return Err(SpectralError::EmptyInput("orbit has no points"));
    }
    let grid = default_grid(default_sigma(qt));
    let field = husimi(qt, u, grid, grid)?;
    let near = |p: [f64; 2]| points.iter().any(|&q| torus_distance(p, q) <= r);
    let mass = field.mass_where(near);
    let inside = (0..grid * grid).filter(|&i| near(field.point(i % grid, i / grid))).count();
    Ok(OrbitMass { radius: r, mass, baseline: inside as f64 / (grid * grid) as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarReport {
    pub n: usize,
    pub orbit: Vec<[f64; 2]>,
    pub radius: f64,
    pub orbit_mass: f64,
    pub baseline: f64,
    /// `α` with `B v = e^{iα} v`.
    pub eigenphase: f64,
    pub branch: u64,
    pub quantum_period: u64,
    pub residual: f64,
}

/// A scarred eigenvector and its eigenphase.
#[derive(Debug, Clone)]
pub struct ScarredState {
    pub vector: CVector,
    pub eigenphase: f64,
    pub branch: u64,
    pub quantum_period: u64,
    pub residual: f64,
}

/// Projects a coherent state at the first orbit point onto the eigenspace of
/// `B` with phase `α_n = (arg c + 2πn)/k`, where `B^k = c·I` and `n = branch`.
pub fn build_scarred_state(
    p: &Propagator,
    orbit: &PeriodicOrbit,
    branch: u64,
    k_max: u64,
) -> Result<ScarredState, SpectralError> {
    let (k, scalar) = match p.quantum_period(k_max) {
        Ok(v) => v,
        Err(PropagatorError::NotFound(k)) => return Err(SpectralError::PeriodNotScalar(k)),
        Err(e) => return Err(e.into()),
    };
    if branch >= k {
        return Err(SpectralError::InvalidBranch { branch, period: k });
    }
    let qt = p.torus();
    let start = orbit.points.first().ok_or(SpectralError::EmptyInput("orbit has no points"))?.to_f64();
    let c0 = coherent_state(qt, &CoherentSpec::balanced(qt, start))?;
    let alpha = ((scalar.arg() + TAU * branch as f64) / k as f64).rem_euclid(TAU);
    let mut v = CVector::zeros(qt.dim());
    let mut term = c0;
    for t in 0..k {
        v += &term * Complex64::from_polar(1.0, -alpha * t as f64);
        if t + 1 < k {
            term = p.evolve(&term, 1)?;
        }
    }
    let norm = v.norm();
    if norm < 1e-8 {
        return Err(SpectralError::DegenerateProjection { branch });
    }
    v /= c(norm, 0.0);
    let bv = p.evolve(&v, 1)?;
    let residual = (bv - &v * Complex64::from_polar(1.0, alpha)).norm();
    if residual > SCAR_RESIDUAL_TOL {
        return Err(SpectralError::PeriodNotScalar(k));
    }
    Ok(ScarredState { vector: v, eigenphase: alpha, branch, quantum_period: k, residual })
}

/// Builds every admissible branch and keeps the one with the largest orbit mass.
pub fn best_scar(p: &Propagator, orbit: &PeriodicOrbit, radius: f64, k_max: u64) -> Result<(ScarredState, ScarReport), SpectralError> {
    let (k, _) = p.quantum_period(k_max).map_err(|e| match e {
        PropagatorError::NotFound(k) => SpectralError::PeriodNotScalar(k),
        other => other.into(),
    })?;
    let points = orbit.points_f64();
    let candidates: Vec<(ScarredState, OrbitMass)> = (0..k)
        .into_par_iter()
        .filter_map(|branch| match build_scarred_state(p, orbit, branch, k_max) {
            Ok(s) => Some(orbit_mass(p.torus(), &s.vector, &points, radius).map(|m| (s, m))),
            Err(SpectralError::DegenerateProjection { .. }) => None,
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (state, mass) = candidates
        .into_iter()
        .max_by(|a, b| a.1.mass.total_cmp(&b.1.mass).then(b.0.branch.cmp(&a.0.branch)))
        .ok_or(SpectralError::DegenerateProjection { branch: 0 })?;
    let report = ScarReport {
        n: p.dim(),
        orbit: points,
        radius,
        orbit_mass: mass.mass,
        baseline: mass.baseline,
        eigenphase: state.eigenphase,
        branch: state.branch,
        quantum_period: state.quantum_period,
        residual: state.residual,
    };
    Ok((state, report))
}

/// Open subsets of the torus used in mass scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Whole,
    Rect { hole: HoleRegion },
    Ball { center: [f64; 2], radius: f64 },
}

impl Region {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Region::Whole => true,
            Region::Rect { hole } => hole.contains(p),
            Region::Ball { center, radius } => torus_distance(p, *center) < *radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMinimum {
    pub region: Region,
    pub min_mass: f64,
    /// Index of the minimizing eigenvector.
    pub argmin: usize,
}

/// Coherent states at the grid points of a region, reusable across many vectors.
#[derive(Debug, Clone)]
pub struct RegionProbe {
    region: Region,
    total_points: usize,
    nf: f64,
    states: Vec<Vec<(usize, Complex64)>>,
}

impl RegionProbe {
    pub fn new(qt: &QuantumTorus, region: Region, grid: usize) -> Result<Self, SpectralError> {
        let sigma = default_sigma(qt);
        let mut states = Vec::new();
        if region != Region::Whole {
            for iy in 0..grid {
                for ix in 0..grid {
                    let p = [ix as f64 / grid as f64, iy as f64 / grid as f64];
                    if region.contains(p) {
                        states.push(coherent_entries(qt, p, sigma)?);
                    }
                }
            }
        }
        Ok(RegionProbe { region, total_points: grid * grid, nf: qt.dim() as f64, states })
    }

    /// Husimi mass of `u` in the region, using the unit total mass of the
    /// exact Husimi density and evaluating only grid points inside the region.
    pub fn mass(&self, u: &CVector) -> Result<f64, SpectralError> {
        check_normalized(u)?;
        if self.region == Region::Whole {
            return Ok(1.0);
        }
        let sum: f64 = self
            .states
            .iter()
            .map(|entries| {
                let overlap: Complex64 = entries.iter().map(|&(j, cj)| cj.conj() * u[j]).sum();
                self.nf * overlap.norm_sqr()
            })
            .sum();
        Ok(sum / self.total_points as f64)
    }
}

/// For each region, the smallest Husimi mass over all eigenvectors.
pub fn min_mass_scan(
    qt: &QuantumTorus,
    d: &SpectralDecomposition,
    regions: &[Region],
) -> Result<Vec<RegionMinimum>, SpectralError> {
    let grid = default_grid(default_sigma(qt));
    regions
        .iter()
        .map(|region| {
            let probe = RegionProbe::new(qt, *region, grid)?;
            let masses: Result<Vec<f64>, SpectralError> =
                (0..d.dim()).into_par_iter().map(|j| probe.mass(&d.eigenvector(j))).collect();
            let masses = masses?;
            let (argmin, min_mass) = masses
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (j, m)| if m < best.1 { (j, m) } else { best });
            Ok(RegionMinimum { region: *region, min_mass, argmin })
        })
        .collect()
}

/// Phase distance on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}
