//! On-disk cache of eigendecompositions keyed by a hash of every input.
//!
//! Each entry is `<key>.bin` (little-endian `f64`s: residual, orthonormality
//! defect, cluster tolerance, the `N` eigenphases, then the eigenvector matrix
//! column-major as `(re, im)` pairs) plus a `<key>.json` sidecar written last.

use crate::error::CliError;
use crate::output::{sha256_hex, to_json, write_atomic};
use catlab::linalg::CMatrix;
use catlab::spectral::{cluster_phases, SpectralDecomposition};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const HEADER: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionParams {
    pub matrix: [i64; 4],
    pub n: usize,
    pub theta: [f64; 2],
    pub cluster_tolerance: f64,
}

impl DecompositionParams {
    pub fn key(&self) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            kind: &'static str,
            version: &'static str,
            params: &'a DecompositionParams,
        }
        let keyed = Keyed { kind: "eigendecomposition", version: env!("CARGO_PKG_VERSION"), params: self };
        sha256_hex(to_json(&keyed).as_bytes())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    key: String,
    version: String,
    n: usize,
    bin_sha256: String,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (self.dir.join(format!("{key}.bin")), self.dir.join(format!("{key}.json")))
    }

    /// A stored decomposition; unreadable or inconsistent entries are misses.
    pub fn get(&self, key: &str) -> Option<SpectralDecomposition> {
        let (bin, side) = self.paths(key);
        let sidecar = std::fs::read(&side).ok()?;
        match load(key, &sidecar, &bin) {
            Ok(d) => Some(d),
            Err(reason) => {
                eprintln!("warning: ignoring corrupt cache entry {key}: {reason}");
                None
            }
        }
    }

    pub fn put(&self, key: &str, d: &SpectralDecomposition) -> Result<(), CliError> {
        let (bin, side) = self.paths(key);
        let n = d.eigenphases.len();
        let mut bytes = Vec::with_capacity(8 * (HEADER + n + 2 * n * n));
        for v in [d.residual, d.orthonormality_defect, d.tolerance].iter().chain(&d.eigenphases) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for z in d.eigenvectors.iter() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        let sidecar = Sidecar {
            key: key.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            n,
            bin_sha256: sha256_hex(&bytes),
        };
        write_atomic(&bin, &bytes)?;
        write_atomic(&side, to_json(&sidecar).as_bytes())
    }
}

fn load(key: &str, sidecar: &[u8], bin: &Path) -> Result<SpectralDecomposition, String> {
    let side: Sidecar = serde_json::from_slice(sidecar).map_err(|e| format!("sidecar: {e}"))?;
    if side.key != key {
        return Err("sidecar key mismatch".into());
    }
    let bytes = std::fs::read(bin).map_err(|e| format!("payload: {e}"))?;
    let n = side.n;
    if bytes.len() != 8 * (HEADER + n + 2 * n * n) {
        return Err(format!("payload has {} bytes for N = {n}", bytes.len()));
    }
    if sha256_hex(&bytes) != side.bin_sha256 {
        return Err("payload checksum mismatch".into());
    }
    let floats: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (head, rest) = floats.split_at(HEADER);
    let (phases, vecs) = rest.split_at(n);
    let eigenvectors = CMatrix::from_iterator(n, n, vecs.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])));
    Ok(SpectralDecomposition {
        eigenphases: phases.to_vec(),
        eigenvectors,
        residual: head[0],
        orthonormality_defect: head[1],
        clusters: cluster_phases(phases, head[2]),
        tolerance: head[2],
    })
}
