use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "catlab", version, about = "Quantum cat map numerical lab", args_override_self = true)]
pub struct Cli {
    /// TOML file supplying defaults for any flag; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the JSON record and any CSV tables.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Eigendecomposition cache directory.
    #[arg(long, global = true, env = "CATLAB_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that A is a hyperbolic element of SL(2, Z) and report its eigendata.
    Validate(MatrixArgs),
    /// Orbit of a rational point.
    Orbit(OrbitArgs),
    /// Period of A modulo m.
    Period(PeriodArgs),
    /// Dimensions N with a short period of A modulo 2N.
    Special(SpecialArgs),
    /// Entropy of the mixture alpha * orbit measure + (1 - alpha) * Lebesgue.
    Entropy(EntropyArgs),
    /// Product and commutator defects of two symbols across N.
    Calculus(CalculusArgs),
    /// Egorov defects of random symbols.
    Egorov(EgorovArgs),
    /// Eigenphases of the quantum propagator.
    Spectrum(SpectrumArgs),
    /// Quantum ergodicity variance across N.
    Qe(QeArgs),
    /// Scarred eigenstate on a periodic orbit.
    Scar(ScarArgs),
    /// Husimi density of a state.
    Husimi(HusimiArgs),
    /// Fractal uncertainty norms of Cantor sets.
    Fup(FupArgs),
    /// Porosity of the survivor sets along stable and unstable lines.
    Omega(OmegaArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(transparent)]
pub struct MatrixArgs {
    /// Matrix entries a,b,c,d of [[a,b],[c,d]].
    #[arg(short = 'A', long = "matrix", value_parser = parse_matrix, default_value = "2,1,1,1")]
    pub matrix: [i64; 4],
}

#[derive(Debug, Clone, Args)]
pub struct TorusArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Twist angles theta1,theta2 in [0,1).
    #[arg(long, value_parser = parse_pair, default_value = "0,0")]
    pub theta: [f64; 2],
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Rational point p1/q,p2/q.
    #[arg(short = 'p', long = "point")]
    pub point: String,
}

#[derive(Debug, Args)]
pub struct PeriodArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(short = 'm', long = "modulus", value_parser = clap::value_parser!(u64).range(1..))]
    pub modulus: u64,
    /// Give up beyond this many steps.
    #[arg(long)]
    pub k_max: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SpecialArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// Inclusive range lo..hi of N.
    #[arg(long, value_parser = parse_range)]
    pub range: (u64, u64),
    #[arg(long, default_value_t = 24, value_parser = clap::value_parser!(u64).range(1..))]
    pub k_max: u64,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct CalculusArgs {
    /// Dimensions: comma list of N, lo..hi, lo..hi:step or lo..hi*factor.
    #[arg(short = 'N', long = "dims", value_parser = parse_dims, default_value = "64..1024*2")]
    pub dims: Dims,
    #[arg(long, default_value = "cos_x")]
    pub left: String,
    #[arg(long, default_value = "cos_xi")]
    pub right: String,
}

#[derive(Debug, Args)]
pub struct EgorovArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(short = 'N', long = "dims", value_parser = parse_dims, default_value = "8..512*2")]
    pub dims: Dims,
    #[arg(long, default_value_t = 5)]
    pub symbol_degree: i64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(short = 'N', long = "dim")]
    pub dim: usize,
    /// Eigenphase clustering tolerance; defaults to 1e-8 N.
    #[arg(long, value_parser = parse_positive)]
    pub cluster_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct QeArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(short = 'N', long = "dims", value_parser = parse_dims, default_value = "100,200,400,800")]
    pub dims: Dims,
    /// Built-in (cos_x, cos_xi) or a symbol defined in the config file.
    #[arg(long, default_value = "cos_x")]
    pub symbol: String,
    #[arg(long, value_parser = parse_positive)]
    pub cluster_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScarArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    #[arg(short = 'N', long = "dim", default_value_t = 1292)]
    pub dim: usize,
    #[arg(long, default_value = "1/3,0")]
    pub orbit: String,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    /// Spectral branch; the branch with the largest orbit mass when omitted.
    #[arg(long)]
    pub branch: Option<u64>,
    #[arg(long, default_value_t = 100_000)]
    pub k_max: u64,
    /// Also report the median orbit mass of this many evenly spaced eigenvectors.
    #[arg(long, default_value_t = 0)]
    pub typical: usize,
    #[command(flatten)]
    pub render: RenderArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    /// Write a log-scale heatmap (PGM, or PNG for a .png path).
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// Husimi grid side; defaults to a power of two resolving the coherent-state width.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
    pub floor_db: f64,
}

#[derive(Debug, Args)]
pub struct HusimiArgs {
    #[command(flatten)]
    pub torus: TorusArgs,
    #[arg(short = 'N', long = "dim")]
    pub dim: usize,
    /// coherent:x,xi or eigen:j
    #[arg(long, default_value = "coherent:0.5,0.5")]
    pub state: String,
    /// Apply the propagator this many times (negative for the inverse).
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub evolve: i64,
    #[command(flatten)]
    pub render: RenderArgs,
}

#[derive(Debug, Args)]
pub struct FupArgs {
    #[arg(long, default_value_t = 3)]
    pub base: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,2")]
    pub digits: Vec<usize>,
    #[arg(long, value_parser = parse_dims, default_value = "1..6")]
    pub levels: Dims,
    /// Also check porosity of each Cantor set at this nu.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Dimensions for the 2-D product-set norm.
    #[arg(long, value_parser = parse_dims)]
    pub counterexample: Option<Dims>,
}

#[derive(Debug, Args)]
pub struct OmegaArgs {
    #[command(flatten)]
    pub matrix: MatrixArgs,
    /// x0,x1,xi0,xi1
    #[arg(long, value_parser = parse_quad, default_value = "0.4,0.6,0.4,0.6")]
    pub hole: [f64; 4],
    #[arg(short = 'N', long = "dims", value_parser = parse_dims, default_value = "1024..16384*2")]
    pub dims: Dims,
    #[arg(long, default_value_t = 16)]
    pub sections: usize,
    /// Survivor mask image of Omega_plus at the largest N.
    #[arg(long)]
    pub render: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

fn parse_floats(s: &str, want: usize) -> Result<Vec<f64>, String> {
    let v: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let v = v.map_err(|e| format!("{s:?}: {e}"))?;
    if v.len() != want || v.iter().any(|x| !x.is_finite()) {
        return Err(format!("expected {want} finite comma-separated numbers, got {s:?}"));
    }
    Ok(v)
}

pub fn parse_matrix(s: &str) -> Result<[i64; 4], String> {
    let v: Result<Vec<i64>, _> = s.split(',').map(|t| t.trim().parse::<i64>()).collect();
    match v {
        Ok(v) if v.len() == 4 => Ok([v[0], v[1], v[2], v[3]]),
        _ => Err(format!("expected four comma-separated integers, got {s:?}")),
    }
}

pub fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    parse_floats(s, 2).map(|v| [v[0], v[1]])
}

pub fn parse_quad(s: &str) -> Result<[f64; 4], String> {
    parse_floats(s, 4).map(|v| [v[0], v[1], v[2], v[3]])
}

pub fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

pub fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected lo..hi, got {s:?}"))?;
    let lo = lo.parse::<u64>().map_err(|e| e.to_string())?;
    let hi = hi.trim_start_matches('=').parse::<u64>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err(format!("empty range {s:?}"));
    }
    Ok((lo, hi))
}

/// `8,16,32`, `1..6`, `100..400:100` or `8..512*2`; ranges are inclusive.
pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim) {
        let bad = |e: &dyn std::fmt::Display| format!("bad dimension list {s:?}: {e}");
        if let Some((lo, rest)) = part.split_once("..") {
            let lo: usize = lo.parse().map_err(|e| bad(&e))?;
            let (hi, next): (&str, Box<dyn Fn(usize) -> usize>) = if let Some((hi, step)) = rest.split_once(':') {
                let step: usize = step.parse().map_err(|e| bad(&e))?;
                if step == 0 {
                    return Err(bad(&"zero step"));
                }
                (hi, Box::new(move |x| x + step))
            } else if let Some((hi, f)) = rest.split_once('*') {
                let f: usize = f.parse().map_err(|e| bad(&e))?;
                if f < 2 || lo == 0 {
                    return Err(bad(&"factor must be at least 2 and start positive"));
                }
                (hi, Box::new(move |x| x * f))
            } else {
                (rest, Box::new(|x| x + 1))
            };
            let hi: usize = hi.parse().map_err(|e| bad(&e))?;
            let mut x = lo;
            while x <= hi {
                out.push(x);
                x = next(x);
            }
        } else {
            out.push(part.parse().map_err(|e| bad(&e))?);
        }
    }
    if out.is_empty() {
        return Err(format!("no dimensions in {s:?}"));
    }
    Ok(Dims(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_lists() {
        assert_eq!(parse_dims("8..64*2").unwrap().0, vec![8, 16, 32, 64]);
        assert_eq!(parse_dims("100,200").unwrap().0, vec![100, 200]);
        assert_eq!(parse_dims("1..3").unwrap().0, vec![1, 2, 3]);
        assert_eq!(parse_dims("10..30:10,7").unwrap().0, vec![10, 20, 30, 7]);
        assert!(parse_dims("5..1").is_err());
        assert!(parse_dims("0..8*2").is_err());
        assert!(parse_dims("x").is_err());
    }

    #[test]
    fn scalar_parsers() {
        assert_eq!(parse_matrix("2,1,1,1").unwrap(), [2, 1, 1, 1]);
        assert!(parse_matrix("2,1,1").is_err());
        assert_eq!(parse_range("3..=9").unwrap(), (3, 9));
        assert!(parse_positive("-1").is_err());
        assert!(parse_pair("0.5,nan").is_err());
    }
}
