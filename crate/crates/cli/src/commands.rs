use crate::args::*;
use crate::cache::{Cache, DecompositionParams};
use crate::error::CliError;
use crate::output::{fmt_f64, pgm_bytes, Table};
use catlab::dynamics::{
    ehrenfest_steps, ks_entropy_mixture, orbit_of_rational, period_mod_bounded, special_n_scan, survivor_mask,
    CatMatrix, HoleRegion, HyperbolicData, OrbitDirection, RationalPoint,
};
use catlab::fup::{
    cantor_set, fup_curve, omega_porosity, porosity_check, product_counterexample, IntervalFamily, LineDirection,
    OmegaSet,
};
use catlab::linalg::{log_log_slope, CVector};
use catlab::phase_space::{
    coherent_state, default_grid, default_sigma, husimi, log_heatmap_pgm, render_log_heatmap, CoherentSpec,
    HusimiField,
};
use catlab::propagator::{build_propagator, Propagator, Route};
use catlab::quantization::{commutator_defect, product_defect, QuantumTorus, TorusSymbol};
use catlab::spectral::{
    best_scar, build_scarred_state, decompose_with_tolerance, default_cluster_tolerance, orbit_mass, qe_row,
    ScarReport, SpectralDecomposition,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub struct Context {
    pub cache: Option<Cache>,
    pub symbols: BTreeMap<String, TorusSymbol>,
}

/// Everything a command produces; written out by the caller.
pub struct Outcome {
    pub inputs: Value,
    pub report: Value,
    pub tables: Vec<Table>,
    pub images: Vec<(PathBuf, Image)>,
}

pub enum Image {
    Bytes(Vec<u8>),
    Husimi { field: HusimiField, floor_db: f64 },
}

impl Outcome {
    fn report(inputs: Value, report: Value) -> Self {
        Outcome { inputs, report, tables: Vec::new(), images: Vec::new() }
    }
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Outcome, CliError> {
    match cmd {
        Command::Validate(a) => validate(a),
        Command::Orbit(a) => orbit(a),
        Command::Period(a) => period(a),
        Command::Special(a) => special(a),
        Command::Entropy(a) => entropy(a),
        Command::Calculus(a) => calculus(a, ctx),
        Command::Egorov(a) => egorov(a),
        Command::Spectrum(a) => spectrum(a, ctx),
        Command::Qe(a) => qe(a, ctx),
        Command::Scar(a) => scar(a, ctx),
        Command::Husimi(a) => husimi_cmd(a, ctx),
        Command::Fup(a) => fup(a),
        Command::Omega(a) => omega(a),
    }
}

fn cat(a: &MatrixArgs) -> Result<CatMatrix, CliError> {
    let [p, q, r, s] = a.matrix;
    Ok(CatMatrix::new([[p, q], [r, s]])?)
}

fn torus(n: usize, theta: [f64; 2]) -> Result<QuantumTorus, CliError> {
    Ok(if theta == [0.0, 0.0] { QuantumTorus::new(n)? } else { QuantumTorus::with_twist(n, theta)? })
}

fn symbol(ctx: &Context, name: &str) -> Result<TorusSymbol, CliError> {
    match name {
        "cos_x" => Ok(TorusSymbol::cos_x()),
        "cos_xi" => Ok(TorusSymbol::cos_xi()),
        _ => ctx
            .symbols
            .get(name)
            .cloned()
            .ok_or_else(|| CliError::usage("UNKNOWN_SYMBOL", format!("no symbol named {name:?}"))),
    }
}

fn route_name(p: &Propagator) -> &'static str {
    match p.route() {
        Route::Generators(_) => "generators",
        Route::Projection => "projection",
    }
}

fn decomposition(
    ctx: &Context,
    matrix: &MatrixArgs,
    p: &Propagator,
    tolerance: Option<f64>,
) -> Result<SpectralDecomposition, CliError> {
    let n = p.dim();
    let tol = tolerance.unwrap_or_else(|| default_cluster_tolerance(n));
    let params = DecompositionParams { matrix: matrix.matrix, n, theta: p.torus().theta(), cluster_tolerance: tol };
    let key = params.key();
    if let Some(d) = ctx.cache.as_ref().and_then(|c| c.get(&key)) {
        return Ok(d);
    }
    let d = decompose_with_tolerance(p, tol)?;
    if let Some(c) = &ctx.cache {
        c.put(&key, &d)?;
    }
    Ok(d)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn validate(a: &MatrixArgs) -> Result<Outcome, CliError> {
    let m = cat(a)?;
    let h = HyperbolicData::of(&m);
    Ok(Outcome::report(
        json!({ "matrix": a.matrix }),
        json!({
            "matrix": m.entries(),
            "trace": m.trace(),
            "lambda_plus": h.lambda_plus,
            "lambda_minus": h.lambda_minus,
            "unstable_dir": h.unstable_dir,
            "stable_dir": h.stable_dir,
            "entropy": h.entropy,
        }),
    ))
}

fn orbit(a: &OrbitArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let start: RationalPoint = a.point.parse()?;
    let orbit = orbit_of_rational(&m, start);
    let points: Vec<[String; 2]> = orbit.points.iter().map(RationalPoint::coordinate_strings).collect();
    Ok(Outcome::report(
        json!({ "matrix": a.matrix, "point": a.point }),
        json!({ "start": start.to_string(), "period": orbit.period, "points": points, "points_f64": orbit.points_f64() }),
    ))
}

fn period(a: &PeriodArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let k_max = a.k_max.unwrap_or(u64::MAX);
    let k = period_mod_bounded(&m, a.modulus, k_max)
        .ok_or_else(|| CliError::domain("PERIOD_NOT_FOUND", format!("no period up to {k_max}")))?;
    Ok(Outcome::report(json!({ "matrix": a.matrix, "modulus": a.modulus, "k_max": a.k_max }), json!({ "period": k })))
}

fn special(a: &SpecialArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let hits = special_n_scan(&m, a.range.0..=a.range.1, a.k_max);
    let mut table = Table::new("special", &["n", "period_mod_2n"]);
    for &(n, k) in &hits {
        table.push(vec![n.to_string(), k.to_string()]);
    }
    let rows: Vec<Value> = hits.iter().map(|&(n, k)| json!({ "n": n, "period_mod_2n": k })).collect();
    let mut out = Outcome::report(
        json!({ "matrix": a.matrix, "range": [a.range.0, a.range.1], "k_max": a.k_max }),
        json!({ "hits": rows }),
    );
    out.tables.push(table);
    Ok(out)
}

fn entropy(a: &EntropyArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let h = ks_entropy_mixture(a.alpha, &m)?;
    let full = HyperbolicData::of(&m).entropy;
    Ok(Outcome::report(
        json!({ "matrix": a.matrix, "alpha": a.alpha }),
        json!({ "entropy": h, "lebesgue_entropy": full, "half_lebesgue_entropy": 0.5 * full }),
    ))
}

fn calculus(a: &CalculusArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let (f, g) = (symbol(ctx, &a.left)?, symbol(ctx, &a.right)?);
    let mut table = Table::new("calculus", &["n", "product_defect", "commutator_defect"]);
    let mut prod = Vec::new();
    let mut comm = Vec::new();
    for &n in &a.dims.0 {
        let qt = QuantumTorus::new(n)?;
        let (p, c) = (product_defect(&qt, &f, &g), commutator_defect(&qt, &f, &g));
        table.push(vec![n.to_string(), fmt_f64(p), fmt_f64(c)]);
        prod.push((n as f64, p));
        comm.push((n as f64, c));
    }
    let slope = |pts: &[(f64, f64)]| {
        let pos: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1 > 0.0).collect();
        (pos.len() >= 2).then(|| log_log_slope(&pos))
    };
    let rows: Vec<Value> = prod
        .iter()
        .zip(&comm)
        .map(|(p, c)| json!({ "n": p.0 as usize, "product_defect": p.1, "commutator_defect": c.1 }))
        .collect();
    let mut out = Outcome::report(
        json!({ "dims": a.dims.0, "left": f, "right": g }),
        json!({ "rows": rows, "product_slope": slope(&prod), "commutator_slope": slope(&comm) }),
    );
    out.tables.push(table);
    Ok(out)
}

fn egorov(a: &EgorovArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.torus.matrix)?;
    if a.symbol_degree < 0 {
        return Err(CliError::usage("BAD_ARGUMENT", "symbol degree must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut table = Table::new("egorov", &["n", "route", "unitarity_defect", "max_egorov_defect"]);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &n in &a.dims.0 {
        let qt = torus(n, a.torus.theta)?;
        let p = build_propagator(&qt, &m)?;
        let defect = (0..a.trials)
            .map(|_| p.egorov_defect(&TorusSymbol::random(&mut rng, a.symbol_degree, true)))
            .fold(0.0, f64::max);
        worst = worst.max(defect);
        table.push(vec![n.to_string(), route_name(&p).into(), fmt_f64(p.unitarity_defect()), fmt_f64(defect)]);
        rows.push(json!({
            "n": n,
            "route": route_name(&p),
            "unitarity_defect": p.unitarity_defect(),
            "max_egorov_defect": defect,
        }));
    }
    let mut out = Outcome::report(
        json!({
            "matrix": a.torus.matrix,
            "theta": a.torus.theta,
            "dims": a.dims.0,
            "symbol_degree": a.symbol_degree,
            "trials": a.trials,
            "seed": a.seed,
        }),
        json!({ "rows": rows, "max_egorov_defect": worst }),
    );
    out.tables.push(table);
    Ok(out)
}

fn spectrum(a: &SpectrumArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let m = cat(&a.torus.matrix)?;
    let qt = torus(a.dim, a.torus.theta)?;
    let p = build_propagator(&qt, &m)?;
    let d = decomposition(ctx, &a.torus.matrix, &p, a.cluster_tol)?;
    let mut table = Table::new("spectrum", &["j", "eigenphase"]);
    for (j, phi) in d.eigenphases.iter().enumerate() {
        table.push(vec![j.to_string(), fmt_f64(*phi)]);
    }
    let sizes: Vec<usize> = d.clusters.iter().map(Vec::len).collect();
    let mut out = Outcome::report(
        json!({ "matrix": a.torus.matrix, "theta": a.torus.theta, "dim": a.dim, "cluster_tol": d.tolerance }),
        json!({
            "n": a.dim,
            "route": route_name(&p),
            "residual": d.residual,
            "orthonormality_defect": d.orthonormality_defect,
            "cluster_tolerance": d.tolerance,
            "cluster_count": d.clusters.len(),
            "cluster_sizes": sizes,
            "eigenphases": d.eigenphases,
        }),
    );
    out.tables.push(table);
    Ok(out)
}

fn qe(a: &QeArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let sym = symbol(ctx, &a.symbol)?;
    if !sym.is_real() {
        return Err(CliError::usage("NOT_REAL_SYMBOL", format!("symbol {} must be declared real", a.symbol)));
    }
    let mut table = Table::new("qe", &["n", "variance", "max_deviation"]);
    let mut rows = Vec::new();
    for &n in &a.dims.0 {
        let qt = QuantumTorus::new(n)?;
        let p = build_propagator(&qt, &m)?;
        let d = decomposition(ctx, &a.matrix, &p, a.cluster_tol)?;
        let row = qe_row(&qt, &sym, &d);
        table.push(vec![n.to_string(), fmt_f64(row.variance), fmt_f64(row.max_deviation)]);
        rows.push(row);
    }
    let positive: Vec<(f64, f64)> = rows.iter().filter(|r| r.variance > 0.0).map(|r| (r.n as f64, r.variance)).collect();
    let slope = (positive.len() >= 2).then(|| log_log_slope(&positive));
    let mut out = Outcome::report(
        json!({ "matrix": a.matrix, "dims": a.dims.0, "symbol": a.symbol, "terms": sym, "cluster_tol": a.cluster_tol }),
        json!({ "symbol": a.symbol, "mean": sym.mean().re, "rows": rows, "slope": slope }),
    );
    out.tables.push(table);
    Ok(out)
}

fn husimi_image(qt: &QuantumTorus, u: &CVector, r: &RenderArgs) -> Result<HusimiField, CliError> {
    let grid = r.grid.unwrap_or_else(|| default_grid(default_sigma(qt)));
    Ok(husimi(qt, u, grid, grid)?)
}

fn push_render(out: &mut Outcome, r: &RenderArgs, field: HusimiField) {
    if let Some(path) = &r.render {
        out.images.push((path.clone(), Image::Husimi { field, floor_db: r.floor_db }));
    }
}

fn render_inputs(r: &RenderArgs) -> Value {
    json!({ "render": r.render, "grid": r.grid, "floor_db": r.floor_db })
}

fn scar(a: &ScarArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let qt = QuantumTorus::new(a.dim)?;
    let p = build_propagator(&qt, &m)?;
    let orbit = orbit_of_rational(&m, a.orbit.parse()?);
    let points = orbit.points_f64();
    let (state, report) = match a.branch {
        None => best_scar(&p, &orbit, a.radius, a.k_max)?,
        Some(branch) => {
            let s = build_scarred_state(&p, &orbit, branch, a.k_max)?;
            let mass = orbit_mass(&qt, &s.vector, &points, a.radius)?;
            let report = ScarReport {
                n: a.dim,
                orbit: points.clone(),
                radius: a.radius,
                orbit_mass: mass.mass,
                baseline: mass.baseline,
                eigenphase: s.eigenphase,
                branch: s.branch,
                quantum_period: s.quantum_period,
                residual: s.residual,
            };
            (s, report)
        }
    };
    let typical = if a.typical > 0 {
        let d = decomposition(ctx, &a.matrix, &p, None)?;
        let n = d.dim();
        let masses: Result<Vec<f64>, CliError> = (0..a.typical.min(n))
            .map(|i| Ok(orbit_mass(&qt, &d.eigenvector(i * n / a.typical.min(n)), &points, a.radius)?.mass))
            .collect();
        Some(median(masses?))
    } else {
        None
    };
    let mut out = Outcome::report(
        json!({
            "matrix": a.matrix,
            "dim": a.dim,
            "orbit": a.orbit,
            "radius": a.radius,
            "branch": a.branch,
            "k_max": a.k_max,
            "typical": a.typical,
            "render": render_inputs(&a.render),
        }),
        json!({ "scar": report, "typical_orbit_mass": typical }),
    );
    if a.render.render.is_some() {
        push_render(&mut out, &a.render, husimi_image(&qt, &state.vector, &a.render)?);
    }
    Ok(out)
}

fn husimi_cmd(a: &HusimiArgs, ctx: &Context) -> Result<Outcome, CliError> {
    let m = cat(&a.torus.matrix)?;
    let qt = torus(a.dim, a.torus.theta)?;
    let needs_propagator = a.evolve != 0 || a.state.starts_with("eigen:");
    let p = if needs_propagator { Some(build_propagator(&qt, &m)?) } else { None };
    let bad_state = || CliError::usage("BAD_STATE", format!("expected coherent:x,xi or eigen:j, got {:?}", a.state));
    let mut u = if let Some(rest) = a.state.strip_prefix("coherent:") {
        let center = parse_pair(rest).map_err(|_| bad_state())?;
        coherent_state(&qt, &CoherentSpec::balanced(&qt, center))?
    } else if let Some(rest) = a.state.strip_prefix("eigen:") {
        let j: usize = rest.parse().map_err(|_| bad_state())?;
        if j >= a.dim {
            return Err(CliError::domain("INDEX_OUT_OF_RANGE", format!("eigenvector {j} of {}", a.dim)));
        }
        let d = decomposition(ctx, &a.torus.matrix, p.as_ref().expect("built above"), None)?;
        d.eigenvector(j)
    } else {
        return Err(bad_state());
    };
    if a.evolve != 0 {
        u = p.as_ref().expect("built above").evolve(&u, a.evolve)?;
    }
    let field = husimi_image(&qt, &u, &a.render)?;
    let report = json!({
        "n": a.dim,
        "width": field.width,
        "height": field.height,
        "sigma": field.sigma,
        "raw_mass": field.raw_mass,
        "max": field.max(),
        "argmax": field.argmax(),
    });
    let mut out = Outcome::report(
        json!({
            "matrix": a.torus.matrix,
            "theta": a.torus.theta,
            "dim": a.dim,
            "state": a.state,
            "evolve": a.evolve,
            "render": render_inputs(&a.render),
        }),
        report,
    );
    push_render(&mut out, &a.render, field);
    Ok(out)
}

fn fup(a: &FupArgs) -> Result<Outcome, CliError> {
    let mut pairs = Vec::new();
    for &k in &a.levels.0 {
        let x = cantor_set(a.base, &a.digits, k as u32)?;
        pairs.push((x.clone(), x));
    }
    let curve = fup_curve(&pairs)?;
    let mut table = Table::new("fup", &["n", "x_size", "y_size", "norm", "volume_bound"]);
    for r in &curve.rows {
        table.push(vec![
            r.n.to_string(),
            r.x_size.to_string(),
            r.y_size.to_string(),
            fmt_f64(r.norm),
            fmt_f64(r.volume_bound),
        ]);
    }
    let porosity = match a.nu {
        Some(nu) => Some(
            pairs
                .iter()
                .map(|(x, _)| porosity_check(x, nu, IntervalFamily::Exhaustive))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let counterexample = match &a.counterexample {
        Some(dims) => Some(
            dims.0
                .iter()
                .map(|&n| Ok(json!({ "n": n, "norm": product_counterexample(n)? })))
                .collect::<Result<Vec<Value>, CliError>>()?,
        ),
        None => None,
    };
    let mut out = Outcome::report(
        json!({
            "base": a.base,
            "digits": a.digits,
            "levels": a.levels.0,
            "nu": a.nu,
            "counterexample": a.counterexample.as_ref().map(|d| &d.0),
        }),
        json!({
            "rows": curve.rows,
            "beta": curve.fit.beta,
            "c": curve.fit.c,
            "residual": curve.fit.residual,
            "volume_exponent": curve.volume_exponent,
            "porosity": porosity,
            "counterexample": counterexample,
        }),
    );
    out.tables.push(table);
    Ok(out)
}

fn omega(a: &OmegaArgs) -> Result<Outcome, CliError> {
    let m = cat(&a.matrix)?;
    let [x0, x1, y0, y1] = a.hole;
    let hole = HoleRegion::new((x0, x1), (y0, y1))?;
    if a.sections == 0 || a.dims.0.iter().any(|&n| n < 2) || a.grid < 2 {
        return Err(CliError::usage("BAD_ARGUMENT", "need N >= 2, a grid of at least 2 and one section"));
    }
    let mut table = Table::new("omega", &["n", "set", "direction", "nu", "mean_nu", "empty_sections", "survivor_fraction"]);
    let mut reports = Vec::new();
    for &n in &a.dims.0 {
        let r = omega_porosity(&m, &hole, n, a.sections);
        for e in &r.entries {
            let set = match e.set {
                OmegaSet::Plus => "plus",
                OmegaSet::Minus => "minus",
            };
            let dir = match e.direction {
                LineDirection::Stable => "stable",
                LineDirection::Unstable => "unstable",
            };
            table.push(vec![
                n.to_string(),
                set.into(),
                dir.into(),
                fmt_f64(e.nu),
                fmt_f64(e.mean_nu),
                e.empty_sections.to_string(),
                fmt_f64(e.survivor_fraction),
            ]);
        }
        reports.push(r);
    }
    let mut out = Outcome::report(
        json!({ "matrix": a.matrix, "hole": a.hole, "dims": a.dims.0, "sections": a.sections, "render": a.render, "grid": a.grid }),
        json!({ "reports": reports }),
    );
    out.tables.push(table);
    if let Some(path) = &a.render {
        let n = *a.dims.0.iter().max().expect("nonempty dims");
        let mask = survivor_mask(&m, &hole, ehrenfest_steps(&m, n), a.grid, a.grid, OrbitDirection::Backward);
        let mut pixels = Vec::with_capacity(a.grid * a.grid);
        for iy in (0..a.grid).rev() {
            pixels.extend((0..a.grid).map(|ix| if mask.get(ix, iy) { 0u8 } else { 255 }));
        }
        out.images.push((path.clone(), Image::Bytes(pgm_bytes(a.grid, a.grid, &pixels))));
    }
    Ok(out)
}

/// Encodes an image for `path`: PNG for a `.png` extension, PGM otherwise.
pub fn write_image(path: &std::path::Path, image: &Image) -> Result<(), CliError> {
    match image {
        Image::Bytes(bytes) => crate::output::write_atomic(path, bytes),
        Image::Husimi { field, floor_db } => {
            let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if is_png {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                Ok(render_log_heatmap(field, *floor_db, path)?)
            } else {
                crate::output::write_atomic(path, &log_heatmap_pgm(field, *floor_db)?)
            }
        }
    }
}
