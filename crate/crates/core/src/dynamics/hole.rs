use super::{CatMatrix, DynamicsError, HyperbolicData};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Axis-aligned open set `[x0, x1) × [ξ0, ξ1)` in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleRegion {
    x: (f64, f64),
    xi: (f64, f64),
}

impl HoleRegion {
    pub fn new(x: (f64, f64), xi: (f64, f64)) -> Result<Self, DynamicsError> {
        for (name, (lo, hi)) in [("x", x), ("xi", xi)] {
            if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                return Err(DynamicsError::InvalidHole(format!(
                    "{name} interval [{lo}, {hi}) must satisfy 0 <= lo < hi <= 1"
                )));
            }
        }
        Ok(HoleRegion { x, xi })
    }

    pub fn x_interval(&self) -> (f64, f64) {
        self.x
    }

    pub fn xi_interval(&self) -> (f64, f64) {
        self.xi
    }

    pub fn area(&self) -> f64 {
        (self.x.1 - self.x.0) * (self.xi.1 - self.xi.0)
    }

    /// Membership of a point already reduced to `[0,1)²`.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x.0 <= p[0] && p[0] < self.x.1 && self.xi.0 <= p[1] && p[1] < self.xi.1
    }
}

/// Which iterates must avoid the hole: forward iterates define `Ω₋`,
/// backward iterates define `Ω₊`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitDirection {
    Forward,
    Backward,
}

/// `⌊log N / log |λ₊|⌋`, the number of steps used for `Ω±(N)`.
pub fn ehrenfest_steps(m: &CatMatrix, n: usize) -> usize {
    let h = HyperbolicData::of(m);
    ((n as f64).ln() / h.entropy).floor().max(0.0) as usize
}

/// Whether the orbit of `p` avoids `hole` for iterates `j = 0..=steps`.
pub fn survives(m: &CatMatrix, hole: &HoleRegion, p: [f64; 2], steps: usize, dir: OrbitDirection) -> bool {
    let step = match dir {
        OrbitDirection::Forward => *m,
        OrbitDirection::Backward => m.inverse(),
    };
    let mut q = p;
    for j in 0..=steps {
        if hole.contains(q) {
            return false;
        }
        if j < steps {
            q = step.apply(q);
        }
    }
    true
}

/// Cell-center sampling of the survivor set; `cells` is row-major with the
/// row index running over `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivorMask {
    pub width: usize,
    pub height: usize,
    pub steps: usize,
    pub direction: OrbitDirection,
    pub cells: Vec<bool>,
}

impl SurvivorMask {
    pub fn get(&self, ix: usize, iy: usize) -> bool {
        self.cells[iy * self.width + ix]
    }

    pub fn fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [(ix as f64 + 0.5) / self.width as f64, (iy as f64 + 0.5) / self.height as f64]
    }
}

pub fn survivor_mask(
    m: &CatMatrix,
    hole: &HoleRegion,
    steps: usize,
    width: usize,
    height: usize,
    direction: OrbitDirection,
) -> SurvivorMask {
    assert!(width >= 2 && height >= 2, "grid must be at least 2x2");
    let cells: Vec<bool> = (0..height)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let y = (iy as f64 + 0.5) / height as f64;
            (0..width).map(move |ix| {
                let x = (ix as f64 + 0.5) / width as f64;
                survives(m, hole, [x, y], steps, direction)
            })
        })
        .collect();
    SurvivorMask { width, height, steps, direction, cells }
}
