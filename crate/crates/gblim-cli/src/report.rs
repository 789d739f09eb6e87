//! Run reports and artifact emission.
//!
//! A [`RunReport`] is a pure function of the scenario content, the CLI
//! overrides, and the crate version: it contains no timestamps, hostnames,
//! or timing, so repeated runs are bit-identical. Every floating-point
//! number is serialized with 17 significant digits (`{:.16e}`), in JSON as
//! well as in CSV, which is enough to round-trip an f64 exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::errors::CliError;
use crate::scenario::ArtifactFormat;

/// 17-significant-digit decimal form of an f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialization wrapper printing through [`fmt17`].
#[derive(Clone, Copy, Debug)]
struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            match serde_json::value::RawValue::from_string(fmt17(self.0)) {
                Ok(raw) => raw.serialize(s),
                Err(e) => Err(serde::ser::Error::custom(e)),
            }
        } else {
            // Not valid JSON as a bare number; stringify to keep the
            // document well-formed. Reports should never contain these.
            s.serialize_str(&format!("{}", self.0))
        }
    }
}

fn f17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    F17(*x).serialize(s)
}

fn f17_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => F17(*v).serialize(s),
        None => s.serialize_none(),
    }
}

fn f17_arr3_opt<S: Serializer>(x: &Option<[f64; 3]>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(a) => {
            let mut seq = s.serialize_seq(Some(3))?;
            for v in a {
                seq.serialize_element(&F17(*v))?;
            }
            seq.end()
        }
        None => s.serialize_none(),
    }
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

/// One classified characteristic point, tagged with its chart.
#[derive(Clone, Debug, Serialize)]
pub struct CharRow {
    pub chart: usize,
    #[serde(serialize_with = "f17")]
    pub u: f64,
    #[serde(serialize_with = "f17")]
    pub v: f64,
    /// Ambient image of (u, v); absent in fixture mode.
    #[serde(serialize_with = "f17_arr3_opt")]
    pub ambient: Option<[f64; 3]>,
    #[serde(serialize_with = "f17")]
    pub trace: f64,
    #[serde(serialize_with = "f17")]
    pub det: f64,
    pub order: usize,
    #[serde(serialize_with = "f17")]
    pub lambda_k: f64,
    pub lambda_sign_ambiguous: bool,
    pub index_formula: i32,
    pub winding_index: i32,
    #[serde(serialize_with = "f17")]
    pub hat_k: f64,
    #[serde(serialize_with = "f17")]
    pub isolation_radius: f64,
}

/// One row of a convergence table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RowOut {
    #[serde(serialize_with = "f17")]
    pub epsilon: f64,
    #[serde(serialize_with = "f17")]
    pub integral: f64,
    #[serde(serialize_with = "f17")]
    pub target: f64,
    #[serde(serialize_with = "f17")]
    pub abs_error: f64,
    #[serde(serialize_with = "f17")]
    pub quad_error: f64,
}

/// Convergence experiment for one test function.
#[derive(Clone, Debug, Serialize)]
pub struct PhiTable {
    pub phi_index: usize,
    pub expr: String,
    pub coords: String,
    #[serde(serialize_with = "f17")]
    pub target: f64,
    pub rows: Vec<RowOut>,
}

/// One invariant-suite verdict.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantEntry {
    pub name: String,
    pub pass: bool,
    /// Worst observed deviation (semantics per invariant; see `detail`).
    #[serde(serialize_with = "f17")]
    pub observed: f64,
    #[serde(serialize_with = "f17")]
    pub tolerance: f64,
    pub detail: String,
}

/// Domination constant for |K^εσ^ε − μ₋₁/√ε|·|X| on one chart, estimated
/// on a sampling grid and re-estimated on a 2× finer grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DominationRow {
    pub chart: usize,
    #[serde(serialize_with = "f17")]
    pub epsilon: f64,
    #[serde(serialize_with = "f17")]
    pub coarse: f64,
    #[serde(serialize_with = "f17")]
    pub fine: f64,
}

/// Euler-characteristic bookkeeping over the merged characteristic set.
#[derive(Clone, Debug, Serialize)]
pub struct EulerSummary {
    /// Σ winding indices.
    pub from_indices: i64,
    /// Σ closed-formula indices over odd-order points.
    pub from_formula: i64,
    pub empty_warning: bool,
    /// Whether Σ indices was checked against a declared compact topology.
    pub poincare_hopf_checked: bool,
    pub note: String,
}

/// A gridded density export (rows go to CSV only).
#[derive(Clone, Debug, Serialize)]
pub struct DensityGrid {
    pub kind: String,
    #[serde(serialize_with = "f17_opt")]
    pub epsilon: Option<f64>,
    pub chart: usize,
    pub n: usize,
    /// (u, v, density) samples; cells where the density is undefined
    /// (characteristic points) are skipped.
    #[serde(skip)]
    pub rows: Vec<[f64; 3]>,
}

/// Everything a run produces.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub scenario_digest: String,
    /// "surface" or "fixture".
    pub mode: String,
    pub compact: Option<bool>,
    pub stages: Vec<String>,
    pub charpoints: Vec<CharRow>,
    /// Distinct characteristic points after cross-chart merging.
    pub merged_points: usize,
    pub convergence: Vec<PhiTable>,
    pub invariants: Vec<InvariantEntry>,
    pub domination: Vec<DominationRow>,
    pub euler: Option<EulerSummary>,
    pub density_grids: Vec<DensityGrid>,
    pub notes: Vec<String>,
}

/// The invariants.json document (a focused view of the report).
#[derive(Serialize)]
struct InvariantsDoc<'a> {
    suite: &'a [InvariantEntry],
    domination: &'a [DominationRow],
    euler: &'a Option<EulerSummary>,
    notes: &'a [String],
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_cell_opt(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        out.push_str(&fmt17(v));
    }
}

fn charpoints_csv(rows: &[CharRow]) -> String {
    let mut out = String::from(
        "chart,u,v,x,y,z,trace,det,order,lambda_k,lambda_sign_ambiguous,\
         index_formula,winding_index,hat_k,isolation_radius\n",
    );
    for r in rows {
        let _ = write!(out, "{},{},{},", r.chart, fmt17(r.u), fmt17(r.v));
        for i in 0..3 {
            csv_cell_opt(&mut out, r.ambient.map(|a| a[i]));
            out.push(',');
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt17(r.trace),
            fmt17(r.det),
            r.order,
            fmt17(r.lambda_k),
            r.lambda_sign_ambiguous,
            r.index_formula,
            r.winding_index,
            fmt17(r.hat_k),
            fmt17(r.isolation_radius),
        );
    }
    out
}

fn convergence_csv(table: &PhiTable) -> String {
    let mut out = String::from("epsilon,integral,target,abs_error,quad_error\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(r.epsilon),
            fmt17(r.integral),
            fmt17(r.target),
            fmt17(r.abs_error),
            fmt17(r.quad_error),
        );
    }
    out
}

fn density_csv(grid: &DensityGrid) -> String {
    let mut out = String::from("u,v,density\n");
    for row in &grid.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt17(row[0]),
            fmt17(row[1]),
            fmt17(row[2])
        );
    }
    out
}

/// Writes every artifact of `report` under `dir` and returns the list of
/// files written. CSV artifacts are only produced for stages that ran.
pub fn emit(
    report: &RunReport,
    dir: &Path,
    formats: &[ArtifactFormat],
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    if formats.contains(&ArtifactFormat::Json) {
        let path = dir.join("report.json");
        let doc = serde_json::to_vec_pretty(report).map_err(|e| CliError::Io {
            path: path.clone(),
            source: std::io::Error::other(e),
        })?;
        write_file(&path, &doc)?;
        written.push(path);

        let path = dir.join("invariants.json");
        let doc = InvariantsDoc {
            suite: &report.invariants,
            domination: &report.domination,
            euler: &report.euler,
            notes: &report.notes,
        };
        let doc = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io {
            path: path.clone(),
            source: std::io::Error::other(e),
        })?;
        write_file(&path, &doc)?;
        written.push(path);
    }

    if formats.contains(&ArtifactFormat::Csv) {
        if report.stages.iter().any(|s| s == "classify") {
            let path = dir.join("charpoints.csv");
            write_file(&path, charpoints_csv(&report.charpoints).as_bytes())?;
            written.push(path);
        }
        for table in &report.convergence {
            let path = dir.join(format!("convergence_{}.csv", table.phi_index));
            write_file(&path, convergence_csv(table).as_bytes())?;
            written.push(path);
        }
        for grid in &report.density_grids {
            let path = dir.join(format!("density_{}_{}.csv", grid.kind, grid.chart));
            write_file(&path, density_csv(grid).as_bytes())?;
            written.push(path);
        }
    }

    Ok(written)
}
