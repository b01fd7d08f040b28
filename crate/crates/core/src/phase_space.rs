//! Coherent states on the quantum torus, Husimi densities and heatmap output.

use crate::dynamics::{wrap_unit, CatMatrix};
use crate::linalg::{c, CVector};
use crate::quantization::{check_normalized, QuantumTorus};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use thiserror::Error;

/// Gaussian tails are dropped beyond this many widths.
const TRUNCATION: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseSpaceError {
    #[error("center ({0}, {1}) must lie in [0, 1)^2")]
    InvalidCenter(f64, f64),
    #[error("width sigma = {sigma} must lie in [h, 1] with h = {h}")]
    InvalidWidth { sigma: f64, h: f64 },
    #[error("coherent state has vanishing norm")]
    DegenerateState,
    #[error("vector is not normalized (norm = {0})")]
    NotNormalized(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid must be at least 2x2, got {0}x{1}")]
    InvalidGrid(usize, usize),
    #[error("floor_db must be negative, got {0}")]
    InvalidFloor(f64),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl PhaseSpaceError {
    pub fn code(&self) -> &'static str {
        match self {
            PhaseSpaceError::InvalidCenter(..) => "INVALID_CENTER",
            PhaseSpaceError::InvalidWidth { .. } => "INVALID_WIDTH",
            PhaseSpaceError::DegenerateState => "DEGENERATE_STATE",
            PhaseSpaceError::NotNormalized(_) => "NOT_NORMALIZED",
            PhaseSpaceError::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            PhaseSpaceError::InvalidGrid(..) => "INVALID_GRID",
            PhaseSpaceError::InvalidFloor(_) => "INVALID_FLOOR",
            PhaseSpaceError::Io(_) => "IO_FAILURE",
        }
    }
}

impl From<std::io::Error> for PhaseSpaceError {
    fn from(e: std::io::Error) -> Self {
        PhaseSpaceError::Io(e.to_string())
    }
}

/// Center `(x₀, ξ₀)` and position width `σ` of a coherent state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentSpec {
    pub center: [f64; 2],
    pub sigma: f64,
}

impl CoherentSpec {
    /// Width `σ = √h`, balanced between position and frequency.
    pub fn balanced(qt: &QuantumTorus, center: [f64; 2]) -> Self {
        CoherentSpec { center, sigma: default_sigma(qt) }
    }

    pub fn validate(&self, qt: &QuantumTorus) -> Result<(), PhaseSpaceError> {
        let [x, xi] = self.center;
        if !((0.0..1.0).contains(&x) && (0.0..1.0).contains(&xi)) {
            return Err(PhaseSpaceError::InvalidCenter(x, xi));
        }
        validate_sigma(qt, self.sigma)
    }
}

pub fn default_sigma(qt: &QuantumTorus) -> f64 {
    qt.h().sqrt()
}

fn validate_sigma(qt: &QuantumTorus, sigma: f64) -> Result<(), PhaseSpaceError> {
    let h = qt.h();
    if !(sigma >= h && sigma <= 1.0) {
        return Err(PhaseSpaceError::InvalidWidth { sigma, h });
    }
    Ok(())
}

/// Normalized nonzero entries of the coherent state, as `(index, value)`.
///
/// `u_j = Σ_m e^{−2πimθ₂} exp(−d²/2σ²) e^{2πiNξ₀d}` with
/// `d = (j + θ₁)/N + m − x₀`, which has the required quasi-periodicity.
pub(crate) fn coherent_entries(qt: &QuantumTorus, center: [f64; 2], sigma: f64) -> Result<Vec<(usize, Complex64)>, PhaseSpaceError> {
    let n = qt.dim();
    let nf = n as f64;
    let [theta1, theta2] = qt.theta();
    let [x0, xi0] = center;
    let reach = TRUNCATION * sigma;
    // lattice sites s with |(s + θ₁)/N − x₀| ≤ reach
    let lo = ((x0 - reach) * nf - theta1).ceil() as i64;
    let hi = ((x0 + reach) * nf - theta1).floor() as i64;
    let site = |s: i64| -> (usize, Complex64) {
        let d = (s as f64 + theta1) / nf - x0;
        let m = s.div_euclid(n as i64);
        let j = s.rem_euclid(n as i64) as usize;
        // the ξ₀ phase is reduced mod 1 before scaling to keep it accurate
        let freq = wrap_unit(nf * xi0 * d);
        let twist = if theta2 == 0.0 { 0.0 } else { -theta2 * m as f64 };
        let amp = (-d * d / (2.0 * sigma * sigma)).exp();
        (j, Complex64::from_polar(amp, 2.0 * PI * (freq + twist)))
    };
    let count = (hi - lo + 1).max(0) as usize;
    let mut entries: Vec<(usize, Complex64)> = if count <= n {
        (lo..=hi).map(site).collect()
    } else {
        let mut dense = vec![Complex64::default(); n];
        for s in lo..=hi {
            let (j, v) = site(s);
            dense[j] += v;
        }
        dense.into_iter().enumerate().collect()
    };
    let norm = entries.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt();
    if !(norm >= 1e-12) {
        return Err(PhaseSpaceError::DegenerateState);
    }
    for (_, v) in entries.iter_mut() {
        *v /= norm;
    }
    Ok(entries)
}

/// The periodized Gaussian wave packet centered at `spec.center`, normalized.
pub fn coherent_state(qt: &QuantumTorus, spec: &CoherentSpec) -> Result<CVector, PhaseSpaceError> {
    spec.validate(qt)?;
    let mut u = CVector::zeros(qt.dim());
    for (j, v) in coherent_entries(qt, spec.center, spec.sigma)? {
        u[j] = v;
    }
    Ok(u)
}

/// Husimi density sampled at `(i/W, j/H)`; `values` is row-major with one
/// row per `ξ` sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiField {
    pub width: usize,
    pub height: usize,
    pub sigma: f64,
    pub values: Vec<f64>,
    /// Quadrature mass of `N|⟨c_ρ, u⟩|²` before normalization.
    pub raw_mass: f64,
}

impl HusimiField {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.width + ix]
    }

    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        [ix as f64 / self.width as f64, iy as f64 / self.height as f64]
    }

    /// Equal-weight quadrature of the field; 1 after normalization.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Grid point of the largest value.
    pub fn argmax(&self) -> [f64; 2] {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        self.point(idx % self.width, idx / self.width)
    }

    /// Quadrature mass of the grid points satisfying `pred`.
    pub fn mass_where<F: Fn([f64; 2]) -> bool>(&self, pred: F) -> f64 {
        let mut sum = 0.0;
        for iy in 0..self.height {
            for ix in 0..self.width {
                if pred(self.point(ix, iy)) {
                    sum += self.get(ix, iy);
                }
            }
        }
        sum / self.values.len() as f64
    }

    /// Block masses on a `cells × cells` partition of the torus.
    pub fn coarse_grain(&self, cells: usize) -> Vec<f64> {
        let mut out = vec![0.0; cells * cells];
        for iy in 0..self.height {
            for ix in 0..self.width {
                let cx = ix * cells / self.width;
                let cy = iy * cells / self.height;
                out[cy * cells + cx] += self.get(ix, iy);
            }
        }
        let total = self.values.len() as f64;
        out.iter_mut().for_each(|v| *v /= total);
        out
    }

    /// The classical pushforward `ρ ↦ H(A⁻¹ρ)` sampled on the same grid by
    /// bilinear interpolation.
    pub fn pushforward(&self, m: &CatMatrix) -> HusimiField {
        let inv = m.inverse();
        let values: Vec<f64> = (0..self.height)
            .into_par_iter()
            .flat_map_iter(|iy| {
                (0..self.width).map(move |ix| {
                    let [x, xi] = inv.apply(self.point(ix, iy));
                    self.interpolate(x, xi)
                })
            })
            .collect();
        HusimiField { values, ..self.clone() }
    }

    fn interpolate(&self, x: f64, xi: f64) -> f64 {
        let fx = wrap_unit(x) * self.width as f64;
        let fy = wrap_unit(xi) * self.height as f64;
        let (ix, iy) = (fx.floor() as usize % self.width, fy.floor() as usize % self.height);
        let (tx, ty) = (fx - fx.floor(), fy - fy.floor());
        let (jx, jy) = ((ix + 1) % self.width, (iy + 1) % self.height);
        (1.0 - ty) * ((1.0 - tx) * self.get(ix, iy) + tx * self.get(jx, iy))
            + ty * ((1.0 - tx) * self.get(ix, jy) + tx * self.get(jx, jy))
    }
}

/// L¹ distance between the block masses of two fields.
pub fn coarse_l1_distance(a: &HusimiField, b: &HusimiField, cells: usize) -> f64 {
    a.coarse_grain(cells).iter().zip(b.coarse_grain(cells)).map(|(x, y)| (x - y).abs()).sum()
}

/// Smallest power of two resolving `σ` with three samples, within `[64, 1024]`.
pub fn default_grid(sigma: f64) -> usize {
    ((3.0 / sigma).ceil() as usize).next_power_of_two().clamp(64, 1024)
}

/// Husimi field with the balanced width `σ = √h`.
pub fn husimi(qt: &QuantumTorus, u: &CVector, width: usize, height: usize) -> Result<HusimiField, PhaseSpaceError> {
    husimi_with_width(qt, u, width, height, default_sigma(qt))
}

/// `N |⟨c_ρ, u⟩|²` on the grid, rescaled to unit quadrature mass.
pub fn husimi_with_width(
    qt: &QuantumTorus,
    u: &CVector,
    width: usize,
    height: usize,
    sigma: f64,
) -> Result<HusimiField, PhaseSpaceError> {
    if u.len() != qt.dim() {
        return Err(PhaseSpaceError::DimensionMismatch { expected: qt.dim(), got: u.len() });
    }
    check_normalized(u).map_err(|_| PhaseSpaceError::NotNormalized(u.norm()))?;
    if width < 2 || height < 2 {
        return Err(PhaseSpaceError::InvalidGrid(width, height));
    }
    validate_sigma(qt, sigma)?;
    let n = qt.dim();
    let nf = n as f64;
    let aliased = 2.0 * TRUNCATION * sigma * nf + 1.0 > nf;
    let mut values = vec![0.0; width * height];
    if aliased {
        let direct: Result<Vec<f64>, PhaseSpaceError> = (0..height)
            .into_par_iter()
            .flat_map_iter(|iy| {
                (0..width).map(move |ix| {
                    let center = [ix as f64 / width as f64, iy as f64 / height as f64];
                    let overlap: Complex64 = coherent_entries(qt, center, sigma)?
                        .into_iter()
                        .map(|(j, cj)| cj.conj() * u[j])
                        .sum();
                    Ok(nf * overlap.norm_sqr())
                })
            })
            .collect();
        values = direct?;
    } else {
        let columns: Vec<Vec<f64>> =
            (0..width).into_par_iter().map(|ix| husimi_column(qt, u, ix as f64 / width as f64, height, sigma)).collect();
        for (ix, col) in columns.iter().enumerate() {
            for (iy, v) in col.iter().enumerate() {
                values[iy * width + ix] = *v;
            }
        }
    }
    let raw_mass = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v /= raw_mass);
    Ok(HusimiField { width, height, sigma, values, raw_mass })
}

/// All `ξ₀ = iy/H` samples at fixed `x₀` with one FFT. With
/// `ξ₀ = iy/H` the coherent-state phase `e^{2πiNξ₀d}` becomes
/// `e^{2πi·iy(s + θ₁ − Nx₀)/H}` for lattice site `s`, a length-`H` DFT in `s`.
/// Requires the Gaussian window to cover at most `N` sites.
fn husimi_column(qt: &QuantumTorus, u: &CVector, x0: f64, height: usize, sigma: f64) -> Vec<f64> {
    let n = qt.dim() as i64;
    let nf = n as f64;
    let [theta1, theta2] = qt.theta();
    let reach = TRUNCATION * sigma;
    let lo = ((x0 - reach) * nf - theta1).ceil() as i64;
    let hi = ((x0 + reach) * nf - theta1).floor() as i64;
    let mut folded = vec![Complex64::default(); height];
    let mut norm_sqr = 0.0;
    for s in lo..=hi {
        let d = (s as f64 + theta1) / nf - x0;
        let amp = (-d * d / (2.0 * sigma * sigma)).exp();
        norm_sqr += amp * amp;
        let m = s.div_euclid(n);
        let j = s.rem_euclid(n) as usize;
        let twist = if theta2 == 0.0 { c(1.0, 0.0) } else { Complex64::from_polar(1.0, 2.0 * PI * theta2 * m as f64) };
        folded[s.rem_euclid(height as i64) as usize] += u[j] * twist * amp;
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(height);
    fft.process(&mut folded);
    let offset = theta1 - nf * x0;
    folded
        .iter()
        .enumerate()
        .map(|(iy, z)| {
            let phase = Complex64::from_polar(1.0, -2.0 * PI * wrap_unit(iy as f64 * offset / height as f64));
            nf * (z * phase).norm_sqr() / norm_sqr
        })
        .collect()
}

/// 8-bit grayscale pixels: `clamp(log₁₀(f/max), floor_db/10, 0)` mapped
/// affinely onto `0..=255`. Image row 0 is the largest `ξ`.
pub fn log_heatmap_pixels(field: &HusimiField, floor_db: f64) -> Result<Vec<u8>, PhaseSpaceError> {
    if !(floor_db < 0.0) {
        return Err(PhaseSpaceError::InvalidFloor(floor_db));
    }
    let lo = floor_db / 10.0;
    let max = field.max();
    let mut pixels = Vec::with_capacity(field.width * field.height);
    for row in (0..field.height).rev() {
        for ix in 0..field.width {
            let v = field.get(ix, row);
            let level = if max > 0.0 && v > 0.0 { (v / max).log10().clamp(lo, 0.0) } else { lo };
            pixels.push((255.0 * (level - lo) / -lo).round() as u8);
        }
    }
    Ok(pixels)
}

/// Binary PGM (P5) encoding of [`log_heatmap_pixels`].
pub fn log_heatmap_pgm(field: &HusimiField, floor_db: f64) -> Result<Vec<u8>, PhaseSpaceError> {
    let pixels = log_heatmap_pixels(field, floor_db)?;
    let mut out = format!("P5\n{} {}\n255\n", field.width, field.height).into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}

/// Writes the log-scale heatmap as PGM, or as PNG when the path ends in `.png`.
pub fn render_log_heatmap(field: &HusimiField, floor_db: f64, path: &Path) -> Result<(), PhaseSpaceError> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        let pixels = log_heatmap_pixels(field, floor_db)?;
        let file = BufWriter::new(File::create(path)?);
        let mut encoder = png::Encoder::new(file, field.width as u32, field.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(|e| PhaseSpaceError::Io(e.to_string()))?;
        writer.write_image_data(&pixels).map_err(|e| PhaseSpaceError::Io(e.to_string()))?;
        writer.finish().map_err(|e| PhaseSpaceError::Io(e.to_string()))?;
    } else {
        let bytes = log_heatmap_pgm(field, floor_db)?;
        let mut file = BufWriter::new(File::create(path)?);
        file.write_all(&bytes)?;
        file.flush()?;
    }
    Ok(())
}

/// Distance on the torus `ℝ²/ℤ²`.
pub fn torus_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    let d = |a: f64, b: f64| {
        let t = wrap_unit(a - b);
        t.min(1.0 - t)
    };
    d(p[0], q[0]).hypot(d(p[1], q[1]))
}
