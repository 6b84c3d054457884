//! Dataset files: CSV tables behind a `#` metadata header, and JSON sidecars.
//!
//! Floats are written with 17 significant digits so a table read back reproduces every value
//! bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ehdwaves_core::continuation::TestFunction;
use ehdwaves_core::{BranchPoint, ExtendedState, SurfaceProfile};
use serde::Serialize;

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Header carried by every table; `created_unix` is the only field that differs between reruns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetMeta {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub created_unix: u64,
}

impl DatasetMeta {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self { command: command.into(), config_hash: config_hash.into(), version: VERSION.into(), created_unix: now_unix() }
    }

    fn render(&self) -> String {
        format!(
            "# ehdwaves dataset\n# command={}\n# config_hash={}\n# version={}\n# created_unix={}\n",
            self.command, self.config_hash, self.version, self.created_unix
        )
    }

    fn parse(lines: &BTreeMap<String, String>) -> Option<Self> {
        Some(Self {
            command: lines.get("command")?.clone(),
            config_hash: lines.get("config_hash")?.clone(),
            version: lines.get("version")?.clone(),
            created_unix: lines.get("created_unix")?.parse().ok()?,
        })
    }
}

/// Writes through a sibling temporary file so readers never see a half-written table.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(CliError::io(&tmp))?;
    fs::rename(&tmp, path).map_err(CliError::io(path))
}

pub fn write_table(path: &Path, meta: &DatasetMeta, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(meta.render().into_bytes());
    let io = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into_error() })?;
    write_atomic(path, &bytes)
}

pub struct Table {
    pub meta: DatasetMeta,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |reason: String| CliError::Dataset { path: path.to_path_buf(), reason };
    let fields: BTreeMap<String, String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let meta = DatasetMeta::parse(&fields).ok_or_else(|| bad("missing metadata header".into()))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| bad(e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(Table { meta, header, rows })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

const BRANCH_COLUMNS: [&str; 11] = [
    "row",
    "s",
    "lambda",
    "q0",
    "residual_norm",
    "tracked_eigenvalue",
    "eigen_continuity",
    "newton_iterations",
    "det_sign",
    "sigma_min",
    "sigma_median",
];

/// Why continuation stopped early, stored as the last row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub s: f64,
    pub reason: String,
}

/// A branch table: one row per converged point, then an optional failure row.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDataset {
    pub meta: DatasetMeta,
    pub modes: usize,
    pub points: Vec<BranchPoint>,
    /// Stability class per point.
    pub labels: Vec<String>,
    pub failure: Option<FailureRow>,
}

impl BranchDataset {
    pub fn header(modes: usize) -> Vec<String> {
        let mut h: Vec<String> = BRANCH_COLUMNS.iter().map(|s| s.to_string()).collect();
        h.push("stability".into());
        h.extend((1..=modes).map(|j| format!("eta_{j}")));
        h.push("note".into());
        h
    }

    fn rows(&self) -> Vec<Vec<String>> {
        let width = BRANCH_COLUMNS.len() + 2 + self.modes;
        let mut rows: Vec<Vec<String>> = self
            .points
            .iter()
            .zip(&self.labels)
            .map(|(p, label)| {
                let mut r = vec![
                    "point".to_string(),
                    fmt_f(p.s),
                    fmt_f(p.state.lambda),
                    fmt_f(p.state.q0),
                    fmt_f(p.residual_norm),
                    fmt_f(p.tracked_eigenvalue),
                    fmt_f(p.eigen_continuity),
                    p.newton_iterations.to_string(),
                    fmt_f(p.test.det_sign),
                    fmt_f(p.test.sigma_min),
                    fmt_f(p.test.sigma_median),
                    label.clone(),
                ];
                r.extend(p.state.eta.padded(self.modes).coeffs().iter().map(|c| fmt_f(*c)));
                r.push(String::new());
                r
            })
            .collect();
        if let Some(f) = &self.failure {
            let mut r = vec![String::new(); width];
            r[0] = "failure".into();
            r[1] = fmt_f(f.s);
            r[width - 1] = f.reason.clone();
            rows.push(r);
        }
        rows
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        write_table(path, &self.meta, &Self::header(self.modes), &self.rows())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let t = read_table(path)?;
        let bad = |reason: String| CliError::Dataset { path: path.to_path_buf(), reason };
        let fixed = BRANCH_COLUMNS.len() + 2;
        if t.header.len() < fixed || t.header[..BRANCH_COLUMNS.len()] != BRANCH_COLUMNS {
            return Err(bad("not a branch table".into()));
        }
        let modes = t.header.len() - fixed;
        let f = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("bad number `{v}`")));
        let mut out = Self { meta: t.meta.clone(), modes, points: vec![], labels: vec![], failure: None };
        for r in &t.rows {
            match r[0].as_str() {
                "point" => {
                    let eta = r[12..12 + modes].iter().map(|v| f(v)).collect::<Result<Vec<_>, _>>()?;
                    out.points.push(BranchPoint {
                        s: f(&r[1])?,
                        state: ExtendedState { eta: SurfaceProfile::new(eta), lambda: f(&r[2])?, q0: f(&r[3])? },
                        residual_norm: f(&r[4])?,
                        tracked_eigenvalue: f(&r[5])?,
                        eigen_continuity: f(&r[6])?,
                        newton_iterations: r[7].parse().map_err(|_| bad(format!("bad count `{}`", r[7])))?,
                        test: TestFunction { det_sign: f(&r[8])?, sigma_min: f(&r[9])?, sigma_median: f(&r[10])? },
                    });
                    out.labels.push(r[11].clone());
                }
                "failure" => out.failure = Some(FailureRow { s: f(&r[1])?, reason: r[r.len() - 1].clone() }),
                other => return Err(bad(format!("unknown row kind `{other}`"))),
            }
        }
        Ok(out)
    }
}

/// `<out>/<command>-<hash>`.
pub fn dataset_dir(out: &Path, command: &str, hash: &str) -> PathBuf {
    out.join(format!("{command}-{hash}"))
}
