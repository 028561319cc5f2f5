//! `report.json` schema and the CSV writers.
//!
//! CSV floats are written with 17 significant digits so that re-running an
//! echoed config reproduces every file byte for byte.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use cubicavoid::{ConjugacyScan, CubicTrajectory, Detection, Error, GroupKind, GroupModel, PotentialSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Mode, ScenarioConfig};

pub const TOOL: &str = "cubicavoid";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of the compact JSON echo of `cfg`.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct DetectionRecord {
    pub t: f64,
    pub lo: f64,
    pub hi: f64,
    pub node: usize,
    pub criterion: String,
    pub status: String,
    pub sv_ratio: f64,
}

impl From<&Detection> for DetectionRecord {
    fn from(d: &Detection) -> Self {
        Self {
            t: d.t,
            lo: d.lo,
            hi: d.hi,
            node: d.node,
            criterion: format!("{:?}", d.criterion),
            status: format!("{:?}", d.status),
            sv_ratio: d.sv_ratio,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BvpRecord {
    pub residual: f64,
    pub iterations: usize,
    pub attempt: usize,
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureRecord {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl From<&Error> for FailureRecord {
    fn from(e: &Error) -> Self {
        let t = match *e {
            Error::CutLocusDuringIntegration { t } | Error::NonFiniteState { t } => Some(t),
            _ => None,
        };
        let debug = format!("{e:?}");
        let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string();
        Self { kind, message: e.to_string(), t }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timing {
    pub total_s: f64,
    pub bvp_s: f64,
    pub integrate_s: f64,
    pub scan_s: f64,
}

/// Everything a single run reports besides the CSV tables.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub mode: Mode,
    pub status: &'static str,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_biconjugate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_sv_ratio: Option<f64>,
    pub detections: Vec<DetectionRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bvp: Option<BvpRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureRecord>,
    pub timing: Timing,
}

impl RunReport {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            mode: cfg.mode,
            status: "ok",
            outputs: Vec::new(),
            verdict: None,
            first_biconjugate: None,
            min_sv_ratio: None,
            detections: Vec::new(),
            bvp: None,
            failure: None,
            timing: Timing::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: String,
    pub first_biconjugate: Option<f64>,
    pub min_sv_ratio: Option<f64>,
    pub directory: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub config: ScenarioConfig,
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    pub total_s: f64,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn join(cells: impl IntoIterator<Item = String>) -> String {
    cells.into_iter().collect::<Vec<_>>().join(",")
}

/// Columns: `t`, the group element (`g11..g33` row-major or `x1..xn`),
/// `xi0_*`, `xi1_*`, `xi2_*`, `V`, `d`.
pub fn trajectory_csv(model: &GroupModel, spec: &PotentialSpec, traj: &CubicTrajectory) -> String {
    let n = model.dim();
    let mut header = vec!["t".to_string()];
    match model.kind() {
        GroupKind::So3 => header.extend((1..=3).flat_map(|i| (1..=3).map(move |j| format!("g{i}{j}")))),
        GroupKind::Abelian => header.extend((1..=n).map(|i| format!("x{i}"))),
    }
    for name in ["xi0", "xi1", "xi2"] {
        header.extend((1..=n).map(|i| format!("{name}_{i}")));
    }
    header.extend(["V".to_string(), "d".to_string()]);

    let mut out = join(header);
    out.push('\n');
    for (t, s) in traj.times().iter().zip(traj.states()) {
        let mut row = vec![float(*t)];
        row.extend(s.g.flat_coords().into_iter().map(float));
        for xi in [&s.xi0, &s.xi1, &s.xi2] {
            row.extend(xi.as_slice().iter().map(|&x| float(x)));
        }
        row.push(float(spec.value(model, &s.g).unwrap_or(f64::NAN)));
        row.push(float(spec.distance(model, &s.g).unwrap_or(f64::NAN)));
        let _ = writeln!(out, "{}", join(row));
    }
    out
}

/// Columns: `t`, `det`, `sv_ratio`.
pub fn scan_csv(scan: &ConjugacyScan) -> String {
    let mut out = String::from("t,det,sv_ratio\n");
    for ((t, d), r) in scan.times().iter().zip(scan.det_values()).zip(scan.sv_ratio()) {
        let _ = writeln!(out, "{},{},{}", float(*t), float(*d), float(*r));
    }
    out
}

/// Columns: `value`, `verdict`, `first_biconjugate` (empty when none),
/// `min_sv_ratio` (empty on failure).
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("value,verdict,first_biconjugate,min_sv_ratio\n");
    for r in rows {
        let opt = |x: Option<f64>| x.map(float).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{}", float(r.value), r.verdict, opt(r.first_biconjugate), opt(r.min_sv_ratio));
    }
    out
}
