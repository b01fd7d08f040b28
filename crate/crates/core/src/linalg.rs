//! Dense complex linear algebra helpers shared by the quantum modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Above this size operator norms fall back to power iteration.
pub const DENSE_NORM_LIMIT: usize = 2048;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Cheap rigorous upper bound `min(‖M‖_F, sqrt(‖M‖₁ ‖M‖∞))` on the operator norm.
pub fn op_norm_bound(m: &CMatrix) -> f64 {
    let frob = m.norm();
    let max_col = m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let max_row = m.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    frob.min((max_col * max_row).sqrt())
}

/// Largest singular value. Dense SVD up to [`DENSE_NORM_LIMIT`], power
/// iteration on `M*M` (relative tolerance 1e-10) beyond.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) <= DENSE_NORM_LIMIT {
        m.clone().singular_values().max()
    } else {
        power_norm(m, 1e-10, 10_000)
    }
}

fn power_norm(m: &CMatrix, tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    // deterministic start with no special alignment to lattice structure
    let mut v = CVector::from_fn(n, |j, _| Complex64::from_polar(1.0, 0.618_033_988_75 * (j * j) as f64));
    v /= c(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let w = m.adjoint() * (m * &v);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / c(nw, 0.0);
        if (next - sigma).abs() <= tol * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Operator-norm check: accepts on the cheap bound, otherwise computes the norm.
pub fn op_norm_within(m: &CMatrix, tol: f64) -> (bool, f64) {
    let bound = op_norm_bound(m);
    if bound <= tol {
        return (true, bound);
    }
    let exact = op_norm(m);
    (exact <= tol, exact)
}

/// `‖U*U − I‖` as an operator norm (cheap bound when it already certifies `tol`).
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    let gram = u.adjoint() * u - CMatrix::identity(n, n);
    let bound = op_norm_bound(&gram);
    if bound <= 1e-12 {
        bound
    } else {
        op_norm(&gram)
    }
}

/// In-place unitary DFT `(F u)_j = N^{-1/2} Σ_m e^{∓2πijm/N} u_m` of every column.
pub fn dft_columns(m: &mut CMatrix, inverse: bool) {
    let n = m.nrows();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let scale = 1.0 / (n as f64).sqrt();
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for mut col in m.column_iter_mut() {
        let slice = col.as_mut_slice();
        fft.process_with_scratch(slice, &mut scratch);
        for z in slice.iter_mut() {
            *z *= scale;
        }
    }
}

/// The unitary DFT matrix `F[j,k] = N^{-1/2} e^{-2πijk/N}`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let s = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |j, k| {
        let phase = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
        Complex64::from_polar(s, phase)
    })
}

/// Least squares fit `y ≈ intercept + slope·x`; returns `(slope, intercept, rms residual)`.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rms = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

/// Slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    linear_fit(&logs).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_dense_dft() {
        let n = 12;
        let x = CMatrix::from_fn(n, 3, |j, k| c((j * 7 + k) as f64 * 0.1, (j as f64).sin()));
        let mut y = x.clone();
        dft_columns(&mut y, false);
        assert!((&y - dft_matrix(n) * &x).norm() < 1e-12);
        dft_columns(&mut y, true);
        assert!((&y - &x).norm() < 1e-12);
    }

    #[test]
    fn norms() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(0.0, -2.0), c(1.0, 1.0)]));
        assert!((op_norm(&m) - 2.0).abs() < 1e-14);
        assert!(op_norm_bound(&m) >= 2.0 - 1e-14);
        assert!((power_norm(&m, 1e-12, 1000) - 2.0).abs() < 1e-9);
        assert!(unitarity_defect(&dft_matrix(16)) < 1e-13);
    }

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let (s, b, r) = linear_fit(&pts);
        assert!((s + 0.5).abs() < 1e-14 && (b - 3.0).abs() < 1e-14 && r < 1e-14);
    }
}
