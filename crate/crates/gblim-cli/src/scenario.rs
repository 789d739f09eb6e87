//! Scenario files: schema, loading, and validation.
//!
//! A scenario is a JSON document (conventionally `*.scn`) describing one
//! experiment: the contact model, either a chart atlas over a surface or a
//! planar normal-form fixture, the ε sweep, the test-function battery, and
//! numerical options. Loading distinguishes malformed JSON
//! ([`CliError::Parse`], with line/column) from schema violations
//! ([`CliError::Validation`], with the dotted field path), both of which
//! exit with code 2.

use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use gblim_core::quad::QuadOptions;
use gblim_core::{builtin_model, default_epsilon_sweep, parse, DensityKind};

use crate::errors::CliError;

const AMBIENT_VARS: [&str; 3] = ["x", "y", "z"];
const CHART_VARS: [&str; 2] = ["u", "v"];

// ---------------------------------------------------------------------------
// Validated schema
// ---------------------------------------------------------------------------

/// A fully validated scenario, plus the content digest of its source file.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// SHA-256 of the scenario file bytes (lowercase hex).
    pub digest: String,
    /// Contact model; absent only in fixture mode.
    pub manifold: Option<ManifoldSpec>,
    pub geometry: GeometrySpec,
    /// ε sweep, as given (the runner sorts it by decreasing ε).
    pub epsilons: Vec<f64>,
    pub phis: Vec<PhiSpec>,
    pub options: RunOptions,
    pub outputs: OutputSpec,
}

impl Scenario {
    pub fn is_fixture(&self) -> bool {
        matches!(self.geometry, GeometrySpec::Fixture { .. })
    }

    pub fn compact(&self) -> bool {
        matches!(
            self.geometry,
            GeometrySpec::Surface { compact: true, .. }
        )
    }

    pub fn chart_count(&self) -> usize {
        match &self.geometry {
            GeometrySpec::Surface { charts, .. } => charts.len(),
            GeometrySpec::Fixture { .. } => 1,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ManifoldSpec {
    /// A catalog key (currently `"heisenberg"`).
    Builtin(String),
    /// Contact form and horizontal frame in ambient coordinates (x, y, z).
    Inline {
        omega: [String; 3],
        f1: [String; 3],
        f2: [String; 3],
        domain: [[f64; 2]; 3],
    },
}

#[derive(Clone, Debug)]
pub struct ChartSpec {
    /// Immersion components in the chart variables (u, v).
    pub immersion: [String; 3],
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub orientation: i8,
    /// Partition-of-unity weight for atlas integration.
    pub weight: Option<String>,
    pub periodic: [bool; 2],
}

#[derive(Clone, Debug)]
pub enum GeometrySpec {
    Surface { charts: Vec<ChartSpec>, compact: bool },
    /// Pure planar vector-field fixture: X components in (x, y) on a box.
    Fixture { x: [String; 2], bounds: [[f64; 2]; 2] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiCoords {
    Chart,
    Ambient,
}

#[derive(Clone, Copy, Debug)]
pub enum PhiSupport {
    Full,
    Disk { center: [f64; 2], radius: f64 },
}

#[derive(Clone, Debug)]
pub struct PhiSpec {
    pub expr: String,
    pub coords: PhiCoords,
    pub support: PhiSupport,
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Locator seeding grid per axis.
    pub grid: usize,
    /// Maximum admitted degeneracy order.
    pub kmax: usize,
    /// Cap on the isolation-radius search around located points.
    pub isolation_cap: f64,
    pub quad: QuadOptions,
    /// Absolute tolerance on quadrature error estimates.
    pub tolerance: f64,
    /// Quadrature refinement levels (≥ 2).
    pub levels: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            grid: 64,
            kmax: 7,
            isolation_cap: 0.5,
            quad: QuadOptions::default(),
            tolerance: 5e-3,
            levels: 2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityGridSpec {
    pub kind: DensityKind,
    pub epsilon: Option<f64>,
    pub chart: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtifactFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub formats: Vec<ArtifactFormat>,
    pub density_grids: Vec<DensityGridSpec>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            formats: vec![ArtifactFormat::Csv, ArtifactFormat::Json],
            density_grids: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Reads, parses, and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::validation("scenario", format!("cannot read {path:?}: {e}"))
    })?;
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let digest = format!("{:x}", Sha256::digest(&bytes));
    validate_scenario(&value, digest)
}

fn err(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::validation(field, reason)
}

// --- Value accessors, all tagged with the dotted field path -----------------

fn as_obj<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object()
        .ok_or_else(|| err(path, "expected an object"))
}

fn as_arr<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, CliError> {
    v.as_array().ok_or_else(|| err(path, "expected an array"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, CliError> {
    v.as_str().ok_or_else(|| err(path, "expected a string"))
}

fn as_f64(v: &Value, path: &str) -> Result<f64, CliError> {
    v.as_f64().ok_or_else(|| err(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| err(path, "expected a nonnegative integer"))
}

fn as_bool(v: &Value, path: &str) -> Result<bool, CliError> {
    v.as_bool().ok_or_else(|| err(path, "expected a boolean"))
}

fn require<'a>(
    m: &'a Map<String, Value>,
    path: &str,
    key: &str,
) -> Result<&'a Value, CliError> {
    m.get(key)
        .ok_or_else(|| err(format!("{path}.{key}"), "required"))
}

fn reject_unknown(
    m: &Map<String, Value>,
    path: &str,
    allowed: &[&str],
) -> Result<(), CliError> {
    for key in m.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(err(
                format!("{path}.{key}"),
                format!("unknown field (expected one of: {})", allowed.join(", ")),
            ));
        }
    }
    Ok(())
}

fn str3(v: &Value, path: &str) -> Result<[String; 3], CliError> {
    let arr = as_arr(v, path)?;
    if arr.len() != 3 {
        return Err(err(path, "expected exactly 3 expressions"));
    }
    Ok([
        as_str(&arr[0], &format!("{path}[0]"))?.to_string(),
        as_str(&arr[1], &format!("{path}[1]"))?.to_string(),
        as_str(&arr[2], &format!("{path}[2]"))?.to_string(),
    ])
}

fn interval(v: &Value, path: &str) -> Result<[f64; 2], CliError> {
    let arr = as_arr(v, path)?;
    if arr.len() != 2 {
        return Err(err(path, "expected [lo, hi]"));
    }
    let lo = as_f64(&arr[0], &format!("{path}[0]"))?;
    let hi = as_f64(&arr[1], &format!("{path}[1]"))?;
    if !(lo < hi) {
        return Err(err(path, "interval needs lo < hi"));
    }
    Ok([lo, hi])
}

fn pair(v: &Value, path: &str) -> Result<[f64; 2], CliError> {
    let arr = as_arr(v, path)?;
    if arr.len() != 2 {
        return Err(err(path, "expected exactly 2 numbers"));
    }
    Ok([
        as_f64(&arr[0], &format!("{path}[0]"))?,
        as_f64(&arr[1], &format!("{path}[1]"))?,
    ])
}

/// Parses `text` with the given variables, mapping failures to a
/// validation error at `path`.
fn check_expr(text: &str, vars: &[&str], path: &str) -> Result<(), CliError> {
    parse(text, vars)
        .map(|_| ())
        .map_err(|e| err(path, format!("invalid expression: {e}")))
}

fn check_expr3(texts: &[String; 3], vars: &[&str], path: &str) -> Result<(), CliError> {
    for (i, t) in texts.iter().enumerate() {
        check_expr(t, vars, &format!("{path}[{i}]"))?;
    }
    Ok(())
}

// --- Section validators ------------------------------------------------------

fn validate_scenario(value: &Value, digest: String) -> Result<Scenario, CliError> {
    let root = as_obj(value, "scenario")?;
    reject_unknown(
        root,
        "scenario",
        &[
            "manifold", "compact", "surface", "fixture", "epsilons", "phis", "options",
            "outputs",
        ],
    )?;

    let geometry = match (root.get("surface"), root.get("fixture")) {
        (Some(s), None) => validate_surface(s, root)?,
        (None, Some(f)) => validate_fixture(f, root)?,
        _ => {
            return Err(err(
                "surface",
                "exactly one of 'surface' or 'fixture' is required",
            ))
        }
    };
    let fixture = matches!(geometry, GeometrySpec::Fixture { .. });

    let manifold = match root.get("manifold") {
        Some(_) if fixture => {
            return Err(err("manifold", "not applicable in fixture mode"))
        }
        None if fixture => None,
        None => return Err(err("manifold", "required")),
        Some(v) => Some(validate_manifold(v)?),
    };

    let epsilons = match root.get("epsilons") {
        Some(_) if fixture => {
            return Err(err("epsilons", "not applicable in fixture mode"))
        }
        None if fixture => Vec::new(),
        None => default_epsilon_sweep(),
        Some(v) => validate_epsilons(v)?,
    };

    let phis = match root.get("phis") {
        Some(_) if fixture => return Err(err("phis", "not applicable in fixture mode")),
        None => Vec::new(),
        Some(v) => validate_phis(v, &geometry)?,
    };

    let options = match root.get("options") {
        None => RunOptions::default(),
        Some(v) => validate_options(v)?,
    };

    let outputs = match root.get("outputs") {
        None => OutputSpec::default(),
        Some(v) => validate_outputs(v, &geometry, &epsilons)?,
    };

    Ok(Scenario {
        digest,
        manifold,
        geometry,
        epsilons,
        phis,
        options,
        outputs,
    })
}

fn validate_manifold(v: &Value) -> Result<ManifoldSpec, CliError> {
    if let Some(name) = v.as_str() {
        builtin_model(name)
            .map_err(|_| err("manifold", format!("unknown catalog key '{name}'")))?;
        return Ok(ManifoldSpec::Builtin(name.to_string()));
    }
    let m = as_obj(v, "manifold")?;
    reject_unknown(m, "manifold", &["omega", "f1", "f2", "domain"])?;
    let omega = str3(require(m, "manifold", "omega")?, "manifold.omega")?;
    let f1 = str3(require(m, "manifold", "f1")?, "manifold.f1")?;
    let f2 = str3(require(m, "manifold", "f2")?, "manifold.f2")?;
    check_expr3(&omega, &AMBIENT_VARS, "manifold.omega")?;
    check_expr3(&f1, &AMBIENT_VARS, "manifold.f1")?;
    check_expr3(&f2, &AMBIENT_VARS, "manifold.f2")?;
    let dv = as_arr(require(m, "manifold", "domain")?, "manifold.domain")?;
    if dv.len() != 3 {
        return Err(err("manifold.domain", "expected 3 intervals"));
    }
    let mut domain = [[0.0; 2]; 3];
    for (i, axis) in dv.iter().enumerate() {
        domain[i] = interval(axis, &format!("manifold.domain[{i}]"))?;
    }
    Ok(ManifoldSpec::Inline {
        omega,
        f1,
        f2,
        domain,
    })
}

fn validate_surface(
    v: &Value,
    root: &Map<String, Value>,
) -> Result<GeometrySpec, CliError> {
    let s = as_obj(v, "surface")?;
    reject_unknown(s, "surface", &["charts"])?;
    let charts_v = as_arr(require(s, "surface", "charts")?, "surface.charts")?;
    if charts_v.is_empty() {
        return Err(err("surface.charts", "at least one chart is required"));
    }
    let mut charts = Vec::with_capacity(charts_v.len());
    for (i, cv) in charts_v.iter().enumerate() {
        charts.push(validate_chart(cv, &format!("surface.charts[{i}]"))?);
    }
    let compact = match root.get("compact") {
        None => false,
        Some(c) => as_bool(c, "compact")?,
    };
    Ok(GeometrySpec::Surface { charts, compact })
}

fn validate_chart(v: &Value, path: &str) -> Result<ChartSpec, CliError> {
    let c = as_obj(v, path)?;
    reject_unknown(
        c,
        path,
        &["immersion", "domain", "orientation", "weight", "periodic"],
    )?;
    let immersion = str3(require(c, path, "immersion")?, &format!("{path}.immersion"))?;
    check_expr3(&immersion, &CHART_VARS, &format!("{path}.immersion"))?;

    let dpath = format!("{path}.domain");
    let d = as_obj(require(c, path, "domain")?, &dpath)?;
    reject_unknown(d, &dpath, &["u", "v"])?;
    let u = interval(require(d, &dpath, "u")?, &format!("{dpath}.u"))?;
    let v_iv = interval(require(d, &dpath, "v")?, &format!("{dpath}.v"))?;

    let orientation = match c.get("orientation") {
        None => 1,
        Some(o) => {
            let o = as_f64(o, &format!("{path}.orientation"))?;
            if o != 1.0 && o != -1.0 {
                return Err(err(format!("{path}.orientation"), "must be 1 or -1"));
            }
            o as i8
        }
    };

    let weight = match c.get("weight") {
        None => None,
        Some(w) => {
            let text = as_str(w, &format!("{path}.weight"))?;
            check_expr(text, &CHART_VARS, &format!("{path}.weight"))?;
            Some(text.to_string())
        }
    };

    let periodic = match c.get("periodic") {
        None => [false, false],
        Some(p) => {
            let arr = as_arr(p, &format!("{path}.periodic"))?;
            if arr.len() != 2 {
                return Err(err(format!("{path}.periodic"), "expected [bool, bool]"));
            }
            [
                as_bool(&arr[0], &format!("{path}.periodic[0]"))?,
                as_bool(&arr[1], &format!("{path}.periodic[1]"))?,
            ]
        }
    };

    Ok(ChartSpec {
        immersion,
        u,
        v: v_iv,
        orientation,
        weight,
        periodic,
    })
}

fn validate_fixture(
    v: &Value,
    root: &Map<String, Value>,
) -> Result<GeometrySpec, CliError> {
    if root.get("compact").is_some() {
        return Err(err("compact", "not applicable in fixture mode"));
    }
    let f = as_obj(v, "fixture")?;
    reject_unknown(f, "fixture", &["x", "bounds"])?;
    let xv = as_arr(require(f, "fixture", "x")?, "fixture.x")?;
    if xv.len() != 2 {
        return Err(err("fixture.x", "expected exactly 2 expressions"));
    }
    let x = [
        as_str(&xv[0], "fixture.x[0]")?.to_string(),
        as_str(&xv[1], "fixture.x[1]")?.to_string(),
    ];
    check_expr(&x[0], &["x", "y"], "fixture.x[0]")?;
    check_expr(&x[1], &["x", "y"], "fixture.x[1]")?;
    let bv = as_arr(require(f, "fixture", "bounds")?, "fixture.bounds")?;
    if bv.len() != 2 {
        return Err(err("fixture.bounds", "expected 2 intervals"));
    }
    let bounds = [
        interval(&bv[0], "fixture.bounds[0]")?,
        interval(&bv[1], "fixture.bounds[1]")?,
    ];
    Ok(GeometrySpec::Fixture { x, bounds })
}

fn validate_epsilons(v: &Value) -> Result<Vec<f64>, CliError> {
    let list = if let Some(arr) = v.as_array() {
        let mut out = Vec::with_capacity(arr.len());
        for (i, e) in arr.iter().enumerate() {
            out.push(as_f64(e, &format!("epsilons[{i}]"))?);
        }
        out
    } else {
        let m = as_obj(v, "epsilons")?;
        reject_unknown(m, "epsilons", &["geometric"])?;
        let gpath = "epsilons.geometric";
        let g = as_obj(require(m, "epsilons", "geometric")?, gpath)?;
        reject_unknown(g, gpath, &["start", "ratio", "count"])?;
        let start = as_f64(require(g, gpath, "start")?, &format!("{gpath}.start"))?;
        let ratio = as_f64(require(g, gpath, "ratio")?, &format!("{gpath}.ratio"))?;
        let count = as_usize(require(g, gpath, "count")?, &format!("{gpath}.count"))?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(err(format!("{gpath}.ratio"), "must lie strictly in (0, 1)"));
        }
        if count == 0 || count > 32 {
            return Err(err(format!("{gpath}.count"), "must be between 1 and 32"));
        }
        (0..count).map(|j| start * ratio.powi(j as i32)).collect()
    };
    if list.is_empty() {
        return Err(err("epsilons", "at least one epsilon is required"));
    }
    for (i, &e) in list.iter().enumerate() {
        if !(e > 0.0) {
            return Err(err(format!("epsilons[{i}]"), "epsilon must be positive"));
        }
        if e > 1.0 {
            return Err(err(format!("epsilons[{i}]"), "epsilon must be at most 1"));
        }
    }
    Ok(list)
}

fn validate_phis(v: &Value, geometry: &GeometrySpec) -> Result<Vec<PhiSpec>, CliError> {
    let charts = match geometry {
        GeometrySpec::Surface { charts, .. } => charts,
        GeometrySpec::Fixture { .. } => unreachable!("rejected earlier"),
    };
    let arr = as_arr(v, "phis")?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, pv) in arr.iter().enumerate() {
        let path = format!("phis[{i}]");
        let p = as_obj(pv, &path)?;
        reject_unknown(p, &path, &["expr", "coords", "support"])?;
        let expr = as_str(require(p, &path, "expr")?, &format!("{path}.expr"))?.to_string();

        let coords = match p.get("coords") {
            None if charts.len() == 1 => PhiCoords::Chart,
            None => PhiCoords::Ambient,
            Some(c) => match as_str(c, &format!("{path}.coords"))? {
                "chart" => PhiCoords::Chart,
                "ambient" => PhiCoords::Ambient,
                other => {
                    return Err(err(
                        format!("{path}.coords"),
                        format!("must be 'chart' or 'ambient', got '{other}'"),
                    ))
                }
            },
        };
        if coords == PhiCoords::Chart && charts.len() > 1 {
            return Err(err(
                format!("{path}.coords"),
                format!(
                    "chart coordinates are ambiguous on an atlas with {} charts; use 'ambient'",
                    charts.len()
                ),
            ));
        }
        match coords {
            PhiCoords::Chart => check_expr(&expr, &CHART_VARS, &format!("{path}.expr"))?,
            PhiCoords::Ambient => check_expr(&expr, &AMBIENT_VARS, &format!("{path}.expr"))?,
        }

        let support = match p.get("support") {
            None => PhiSupport::Full,
            Some(s) => validate_support(s, &format!("{path}.support"), charts)?,
        };
        out.push(PhiSpec {
            expr,
            coords,
            support,
        });
    }
    Ok(out)
}

fn validate_support(
    v: &Value,
    path: &str,
    charts: &[ChartSpec],
) -> Result<PhiSupport, CliError> {
    if let Some(name) = v.as_str() {
        if name == "full" {
            return Ok(PhiSupport::Full);
        }
        return Err(err(path, format!("expected 'full' or a disk object, got '{name}'")));
    }
    let m = as_obj(v, path)?;
    reject_unknown(m, path, &["disk"])?;
    let dpath = format!("{path}.disk");
    let d = as_obj(require(m, path, "disk")?, &dpath)?;
    reject_unknown(d, &dpath, &["center", "radius"])?;
    let center = pair(require(d, &dpath, "center")?, &format!("{dpath}.center"))?;
    let radius = as_f64(require(d, &dpath, "radius")?, &format!("{dpath}.radius"))?;
    if !(radius > 0.0) {
        return Err(err(format!("{dpath}.radius"), "must be positive"));
    }
    if charts.len() > 1 {
        return Err(err(
            path.to_string(),
            "disk support is only available on single-chart scenarios; use 'full'",
        ));
    }
    let c = &charts[0];
    let inside = center[0] - radius >= c.u[0] - 1e-12
        && center[0] + radius <= c.u[1] + 1e-12
        && center[1] - radius >= c.v[0] - 1e-12
        && center[1] + radius <= c.v[1] + 1e-12;
    if !inside {
        return Err(err(
            dpath,
            "disk must lie inside the chart domain (compact support)",
        ));
    }
    Ok(PhiSupport::Disk { center, radius })
}

fn validate_options(v: &Value) -> Result<RunOptions, CliError> {
    let m = as_obj(v, "options")?;
    reject_unknown(
        m,
        "options",
        &["grid", "kmax", "isolation_cap", "quad", "tolerance", "levels"],
    )?;
    let mut opts = RunOptions::default();
    if let Some(g) = m.get("grid") {
        opts.grid = as_usize(g, "options.grid")?;
        if !(8..=512).contains(&opts.grid) {
            return Err(err("options.grid", "must be between 8 and 512"));
        }
    }
    if let Some(k) = m.get("kmax") {
        opts.kmax = as_usize(k, "options.kmax")?;
        if !(1..=9).contains(&opts.kmax) {
            return Err(err("options.kmax", "must be between 1 and 9"));
        }
    }
    if let Some(c) = m.get("isolation_cap") {
        opts.isolation_cap = as_f64(c, "options.isolation_cap")?;
        if !(opts.isolation_cap > 0.0) {
            return Err(err("options.isolation_cap", "must be positive"));
        }
    }
    if let Some(t) = m.get("tolerance") {
        opts.tolerance = as_f64(t, "options.tolerance")?;
        if !(opts.tolerance > 0.0) {
            return Err(err("options.tolerance", "must be positive"));
        }
    }
    if let Some(l) = m.get("levels") {
        opts.levels = as_usize(l, "options.levels")?;
        if !(2..=6).contains(&opts.levels) {
            return Err(err("options.levels", "must be between 2 and 6"));
        }
    }
    if let Some(q) = m.get("quad") {
        opts.quad = validate_quad(q)?;
    }
    Ok(opts)
}

fn validate_quad(v: &Value) -> Result<QuadOptions, CliError> {
    let m = as_obj(v, "options.quad")?;
    reject_unknown(
        m,
        "options.quad",
        &[
            "bulk",
            "angular",
            "radial",
            "ratio",
            "inner_cutoff_rel",
            "patch_radius_cap",
        ],
    )?;
    let mut q = QuadOptions::default();
    let node_count = |key: &str, current: usize| -> Result<usize, CliError> {
        match m.get(key) {
            None => Ok(current),
            Some(val) => {
                let path = format!("options.quad.{key}");
                let n = as_usize(val, &path)?;
                if !(4..=512).contains(&n) {
                    return Err(err(path, "must be between 4 and 512"));
                }
                Ok(n)
            }
        }
    };
    q.bulk = node_count("bulk", q.bulk)?;
    q.angular = node_count("angular", q.angular)?;
    q.radial = node_count("radial", q.radial)?;
    if let Some(r) = m.get("ratio") {
        q.ratio = as_f64(r, "options.quad.ratio")?;
        if !(q.ratio > 0.0 && q.ratio < 1.0) {
            return Err(err("options.quad.ratio", "must lie strictly in (0, 1)"));
        }
    }
    if let Some(c) = m.get("inner_cutoff_rel") {
        q.inner_cutoff_rel = as_f64(c, "options.quad.inner_cutoff_rel")?;
        if !(q.inner_cutoff_rel > 0.0 && q.inner_cutoff_rel < 0.1) {
            return Err(err(
                "options.quad.inner_cutoff_rel",
                "must lie strictly in (0, 0.1)",
            ));
        }
    }
    if let Some(c) = m.get("patch_radius_cap") {
        q.patch_radius_cap = as_f64(c, "options.quad.patch_radius_cap")?;
        if !(q.patch_radius_cap > 0.0) {
            return Err(err("options.quad.patch_radius_cap", "must be positive"));
        }
    }
    Ok(q)
}

fn validate_outputs(
    v: &Value,
    geometry: &GeometrySpec,
    epsilons: &[f64],
) -> Result<OutputSpec, CliError> {
    let m = as_obj(v, "outputs")?;
    reject_unknown(m, "outputs", &["dir", "formats", "density_grids"])?;
    let mut out = OutputSpec::default();
    if let Some(d) = m.get("dir") {
        out.dir = PathBuf::from(as_str(d, "outputs.dir")?);
    }
    if let Some(f) = m.get("formats") {
        let arr = as_arr(f, "outputs.formats")?;
        if arr.is_empty() {
            return Err(err("outputs.formats", "at least one format is required"));
        }
        let mut formats = Vec::new();
        for (i, fv) in arr.iter().enumerate() {
            let path = format!("outputs.formats[{i}]");
            match as_str(fv, &path)? {
                "csv" => formats.push(ArtifactFormat::Csv),
                "json" => formats.push(ArtifactFormat::Json),
                other => {
                    return Err(err(path, format!("expected 'csv' or 'json', got '{other}'")))
                }
            }
        }
        formats.dedup();
        out.formats = formats;
    }
    if let Some(g) = m.get("density_grids") {
        if matches!(geometry, GeometrySpec::Fixture { .. }) {
            return Err(err("outputs.density_grids", "not applicable in fixture mode"));
        }
        let ncharts = match geometry {
            GeometrySpec::Surface { charts, .. } => charts.len(),
            GeometrySpec::Fixture { .. } => 1,
        };
        let arr = as_arr(g, "outputs.density_grids")?;
        for (i, gv) in arr.iter().enumerate() {
            out.density_grids
                .push(validate_density_grid(gv, i, ncharts, epsilons)?);
        }
    }
    Ok(out)
}

fn validate_density_grid(
    v: &Value,
    i: usize,
    ncharts: usize,
    epsilons: &[f64],
) -> Result<DensityGridSpec, CliError> {
    let path = format!("outputs.density_grids[{i}]");
    let m = as_obj(v, &path)?;
    reject_unknown(m, &path, &["kind", "epsilon", "chart", "n"])?;
    let kind = match as_str(require(m, &path, "kind")?, &format!("{path}.kind"))? {
        "k_eps_sigma_eps" => DensityKind::KEpsSigmaEps,
        "mu_minus_one" => DensityKind::MuMinusOne,
        "difference" => DensityKind::Difference,
        "inv_norm" => DensityKind::InvNorm,
        other => {
            return Err(err(
                format!("{path}.kind"),
                format!(
                    "expected one of k_eps_sigma_eps, mu_minus_one, difference, inv_norm; \
                     got '{other}'"
                ),
            ))
        }
    };
    let epsilon = match m.get("epsilon") {
        None => None,
        Some(e) => {
            let e = as_f64(e, &format!("{path}.epsilon"))?;
            if !(e > 0.0) {
                return Err(err(format!("{path}.epsilon"), "epsilon must be positive"));
            }
            if e > 1.0 {
                return Err(err(format!("{path}.epsilon"), "epsilon must be at most 1"));
            }
            Some(e)
        }
    };
    let needs_eps = matches!(kind, DensityKind::KEpsSigmaEps | DensityKind::Difference);
    let epsilon = match (needs_eps, epsilon) {
        (true, None) => Some(
            epsilons
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
                .min(1.0),
        ),
        (true, some) => some,
        (false, Some(_)) => {
            return Err(err(
                format!("{path}.epsilon"),
                "not applicable for this density kind",
            ))
        }
        (false, None) => None,
    };
    let chart = match m.get("chart") {
        None => 0,
        Some(c) => as_usize(c, &format!("{path}.chart"))?,
    };
    if chart >= ncharts {
        return Err(err(
            format!("{path}.chart"),
            format!("chart index out of range (atlas has {ncharts})"),
        ));
    }
    let n = match m.get("n") {
        None => 48,
        Some(nv) => as_usize(nv, &format!("{path}.n"))?,
    };
    if !(2..=512).contains(&n) {
        return Err(err(format!("{path}.n"), "must be between 2 and 512"));
    }
    Ok(DensityGridSpec {
        kind,
        epsilon,
        chart,
        n,
    })
}
