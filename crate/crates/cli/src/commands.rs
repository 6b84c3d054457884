//! One function per subcommand. Each writes a dataset directory named after the config hash.

use std::path::{Path, PathBuf};

use ehdwaves_core::params::first_inadmissible_mode;
use ehdwaves_core::stability::{Stability, NEUTRAL_BAND};
use ehdwaves_core::{
    admissible_field, assemble_residual, bifurcation_speeds, branch_direction_reduced, classify_branch, classify_trivial,
    continue_branch, crossing_slope, dispersion, extend_branch, find_bifurcation_points, fit_curvature, mode,
    nondegeneracy_checks, resonance_condition_holds, resonance_field, resonance_record, switch_branch, BifurcationPoint, Branch, BranchKind,
    BranchSign, CurvatureFit, SingularityEvent, WaveError, WaveParams, WaveProblem,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigIssue, RunConfig};
use crate::dataset::{dataset_dir, fmt_f, write_json, write_table, BranchDataset, DatasetMeta, FailureRow};
use crate::error::CliError;

/// Where and how a command writes.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub resume: bool,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

struct Target {
    dir: PathBuf,
    meta: DatasetMeta,
}

impl Target {
    fn new(cfg: &RunConfig, ctx: &RunContext, command: &str) -> Self {
        let hash = cfg.config_hash(command);
        Self { dir: dataset_dir(&ctx.out, command, &hash), meta: DatasetMeta::new(command, &hash) }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[derive(Serialize)]
struct RootEntry {
    k: usize,
    plus: Option<f64>,
    minus: Option<f64>,
}

#[derive(Serialize)]
struct DispersionSidecar<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    params: WaveParams,
    roots: Vec<RootEntry>,
    warnings: Vec<String>,
}

pub fn cmd_dispersion(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "dispersion");
    let p = &cfg.params;
    let g = &cfg.dispersion;
    let ks: Vec<usize> = (g.kmin..=cfg.numerics.kmax).collect();
    let lambdas: Vec<f64> = if g.lambda_points == 1 {
        vec![g.lambda_min]
    } else {
        (0..g.lambda_points).map(|i| g.lambda_min + (g.lambda_max - g.lambda_min) * i as f64 / (g.lambda_points - 1) as f64).collect()
    };
    let mut rows = Vec::new();
    for &k in &ks {
        for &l in &lambdas {
            rows.push(vec![k.to_string(), fmt_f(l), fmt_f(dispersion(mode(k), l, p))]);
        }
    }
    let mut roots = Vec::new();
    let mut warnings = Vec::new();
    for &k in &ks {
        match bifurcation_speeds(mode(k), p) {
            Ok(Some(s)) => roots.push(RootEntry { k, plus: Some(s.plus), minus: Some(s.minus) }),
            Ok(None) => {
                warnings.push(format!("mode {k}: no real bifurcation speed"));
                roots.push(RootEntry { k, plus: None, minus: None });
            }
            Err(e) => {
                warnings.push(format!("mode {k}: {e}"));
                roots.push(RootEntry { k, plus: None, minus: None });
            }
        }
    }
    if let Some(&kmax) = ks.last() {
        if !admissible_field(p, kmax) {
            let k = first_inadmissible_mode(p, kmax).unwrap_or(kmax);
            warnings.push(format!("field inadmissible: restoring term does not exceed eps0 E0^2 at mode {k}"));
        }
    }
    let csv = t.path("dispersion.csv");
    let json = t.path("dispersion.json");
    write_table(&csv, &t.meta, &strings(&["k", "lambda", "D_k"]), &rows)?;
    write_json(&json, &DispersionSidecar { meta: &t.meta, params: *p, roots, warnings })?;
    Ok(Outcome { dir: t.dir, files: vec![csv, json] })
}

#[derive(Serialize)]
struct PointsSidecar<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    params: WaveParams,
    points: usize,
    simple: usize,
}

pub fn cmd_points(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "points");
    let p = &cfg.params;
    let prob = WaveProblem::new(*p, cfg.numerics.m, cfg.numerics.n)?;
    let pts = find_bifurcation_points(p, cfg.numerics.kmax, Some(&prob.disc))?;
    let rows: Vec<Vec<String>> = pts
        .iter()
        .map(|bp| {
            vec![
                bp.k.to_string(),
                bp.sign.label().into(),
                fmt_f(bp.lambda_star),
                bp.kernel_dim.to_string(),
                bp.partner_mode.map(|m| m.to_string()).unwrap_or_default(),
                opt_f(crossing_slope(bp, p).ok()),
                opt_f(branch_direction_reduced(bp, p).ok().map(|d| d.lambda_double_prime)),
            ]
        })
        .collect();
    let header = strings(&["k", "sign", "lambda_star", "kernel_dim", "partner_mode", "crossing_slope", "lambda_double_prime"]);
    let csv = t.path("points.csv");
    let json = t.path("points.json");
    write_table(&csv, &t.meta, &header, &rows)?;
    let simple = pts.iter().filter(|b| b.is_simple()).count();
    write_json(&json, &PointsSidecar { meta: &t.meta, params: *p, points: pts.len(), simple })?;
    Ok(Outcome { dir: t.dir, files: vec![csv, json] })
}

/// Stability class of every point, with tracking losses marked individually.
fn labels_of(branch: &Branch) -> Vec<String> {
    match classify_branch(branch) {
        Ok(labels) => labels.iter().map(|l| l.class.label().to_string()).collect(),
        Err(_) => branch
            .points
            .iter()
            .map(|p| {
                if p.tracked_eigenvalue.is_nan() {
                    "tracking_lost".to_string()
                } else {
                    Stability::of(p.tracked_eigenvalue, NEUTRAL_BAND).label().to_string()
                }
            })
            .collect(),
    }
}

fn branch_dataset(branch: &Branch, meta: &DatasetMeta, modes: usize) -> BranchDataset {
    BranchDataset {
        meta: meta.clone(),
        modes,
        points: branch.points.clone(),
        labels: labels_of(branch),
        failure: branch.termination.as_ref().map(|e| FailureRow { s: branch.reached(), reason: e.to_string() }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventSummary {
    pub s_lo: f64,
    pub s_hi: f64,
    pub sign_change: bool,
    pub dominant_mode: usize,
    pub lambda: f64,
}

impl From<&SingularityEvent> for EventSummary {
    fn from(e: &SingularityEvent) -> Self {
        Self { s_lo: e.s_lo, s_hi: e.s_hi, sign_change: e.sign_change, dominant_mode: e.dominant_mode, lambda: e.point.state.lambda }
    }
}

#[derive(Serialize)]
struct BranchSummary<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    params: WaveParams,
    k: usize,
    sign: BranchSign,
    lambda_star: f64,
    direction: f64,
    smax: f64,
    rows: usize,
    resumed_rows: usize,
    reached: f64,
    termination: Option<String>,
    fit: Option<CurvatureFit>,
    /// λ″(0) from the weakly nonlinear expansion.
    expansion_lambda_double_prime: Option<f64>,
    events: Vec<EventSummary>,
}

fn simple_point(k: usize, sign: BranchSign, p: &WaveParams, modes: usize) -> Result<BifurcationPoint, CliError> {
    let bp = BifurcationPoint::new(mode(k), sign, p, modes)?;
    if !bp.is_simple() {
        return Err(WaveError::TwoDimensionalKernel { k, partner: bp.partner_mode.map_or(0, |m| m.get()) }.into());
    }
    Ok(bp)
}

pub fn cmd_branch(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "branch");
    let p = cfg.params;
    let prob = WaveProblem::new(p, cfg.numerics.m, cfg.numerics.n)?;
    let bp = simple_point(cfg.branch.k, cfg.branch.sign, &p, prob.modes())?;
    let opts = cfg.continuation();
    let csv = t.path("branch.csv");
    let mut resumed_rows = 0;
    let branch = if ctx.resume && csv.exists() {
        let stored = BranchDataset::read(&csv)?;
        if stored.meta.config_hash != t.meta.config_hash || stored.modes != prob.modes() {
            return Err(CliError::Dataset { path: csv, reason: "stored config hash differs from this configuration".into() });
        }
        resumed_rows = stored.points.len();
        let seed = Branch {
            origin: bp,
            params: p,
            kind: BranchKind::Primary,
            mode: bp.k.get(),
            points: stored.points,
            events: vec![],
            termination: None,
        };
        extend_branch(seed, &prob, &opts)?
    } else {
        continue_branch(&bp, &prob, &opts)?
    };
    branch_dataset(&branch, &t.meta, prob.modes()).write(&csv)?;
    let summary = BranchSummary {
        meta: &t.meta,
        params: p,
        k: bp.k.get(),
        sign: bp.sign,
        lambda_star: bp.lambda_star,
        direction: opts.direction,
        smax: opts.smax,
        rows: branch.points.len(),
        resumed_rows,
        reached: branch.reached(),
        termination: branch.termination.as_ref().map(|e| e.to_string()),
        fit: fit_curvature(&branch.points, bp.lambda_star),
        expansion_lambda_double_prime: branch_direction_reduced(&bp, &p).ok().map(|d| d.lambda_double_prime),
        events: branch.events.iter().map(EventSummary::from).collect(),
    };
    let json = t.path("summary.json");
    write_json(&json, &summary)?;
    if let Some(e) = &branch.termination {
        return Err(CliError::Truncated { reason: e.to_string(), dir: t.dir });
    }
    Ok(Outcome { dir: t.dir, files: vec![csv, json] })
}

#[derive(Serialize)]
struct StabilitySummary<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    k: usize,
    sign: BranchSign,
    lambda_star: f64,
    crossing_slope: f64,
    branch_rows: usize,
    termination: Option<String>,
}

pub fn cmd_stability(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "stability");
    let p = cfg.params;
    let prob = WaveProblem::new(p, cfg.numerics.m, cfg.numerics.n)?;
    let bp = simple_point(cfg.branch.k, cfg.branch.sign, &p, prob.modes())?;
    let slope = crossing_slope(&bp, &p)?;
    let w = cfg.stability.half_width;
    let trivial = classify_trivial(bp.lambda_star - w, bp.lambda_star + w, cfg.stability.samples, &bp, &p)?;
    let trivial_rows: Vec<Vec<String>> = trivial
        .iter()
        .map(|(l, lab)| vec![fmt_f(*l), fmt_f(lab.tracked_eigenvalue), lab.class.label().into()])
        .collect();
    let opts = ehdwaves_core::ContinuationOptions { detect_events: false, ..cfg.continuation() };
    let branch = continue_branch(&bp, &prob, &opts)?;
    let labels = labels_of(&branch);
    let branch_rows: Vec<Vec<String>> = branch
        .points
        .iter()
        .zip(&labels)
        .map(|(q, lab)| vec![fmt_f(q.s), fmt_f(q.state.lambda), fmt_f(q.tracked_eigenvalue), lab.clone()])
        .collect();
    let tcsv = t.path("trivial.csv");
    let bcsv = t.path("branch_stability.csv");
    let json = t.path("summary.json");
    write_table(&tcsv, &t.meta, &strings(&["lambda", "eigenvalue", "stability"]), &trivial_rows)?;
    write_table(&bcsv, &t.meta, &strings(&["s", "lambda", "tracked_eigenvalue", "stability"]), &branch_rows)?;
    write_json(
        &json,
        &StabilitySummary {
            meta: &t.meta,
            k: bp.k.get(),
            sign: bp.sign,
            lambda_star: bp.lambda_star,
            crossing_slope: slope,
            branch_rows: branch.points.len(),
            termination: branch.termination.as_ref().map(|e| e.to_string()),
        },
    )?;
    if let Some(e) = &branch.termination {
        return Err(CliError::Truncated { reason: e.to_string(), dir: t.dir });
    }
    Ok(Outcome { dir: t.dir, files: vec![tcsv, bcsv, json] })
}

#[derive(Serialize)]
struct AtlasSidecar<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    rows: usize,
    resonant: usize,
    certified: usize,
}

pub fn cmd_resonance_atlas(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "resonance-atlas");
    let r = &cfg.resonance;
    let mut rows = Vec::new();
    let (mut resonant, mut certified) = (0, 0);
    for k in 1..=r.atlas_kmax {
        for l in (1..=r.atlas_kmax).filter(|l| *l != k) {
            for &gamma in &r.gammas {
                let p = cfg.params.with_gamma(gamma);
                let holds = resonance_condition_holds(mode(k), mode(l), &p);
                let e_kl = resonance_field(mode(k), mode(l), &p)?;
                let (mut det1, mut det2, mut note) = (None, None, String::new());
                if holds {
                    resonant += 1;
                    match resonance_record(mode(k), mode(l), &p) {
                        Ok(rec) => {
                            det1 = Some(rec.determinant1);
                            det2 = Some(rec.determinant2);
                            match rec.degeneracy() {
                                Some(WaveError::DegenerateResonance { which, .. }) => note = format!("degenerate determinant {which}"),
                                Some(e) => note = e.to_string(),
                                None => certified += 1,
                            }
                        }
                        Err(e) => note = e.to_string(),
                    }
                }
                rows.push(vec![
                    k.to_string(),
                    l.to_string(),
                    fmt_f(gamma),
                    opt_f(e_kl),
                    holds.to_string(),
                    opt_f(det1),
                    opt_f(det2),
                    note,
                ]);
            }
        }
    }
    let header = strings(&["k", "l", "gamma", "E_kl", "resonance_condition_holds", "det1", "det2", "note"]);
    let csv = t.path("atlas.csv");
    let json = t.path("atlas.json");
    write_table(&csv, &t.meta, &header, &rows)?;
    write_json(&json, &AtlasSidecar { meta: &t.meta, rows: rows.len(), resonant, certified })?;
    Ok(Outcome { dir: t.dir, files: vec![csv, json] })
}

#[derive(Debug, Clone, Serialize)]
struct Attempt {
    delta: f64,
    e0: f64,
    direction: f64,
    rows: usize,
    reached: f64,
    events: Vec<EventSummary>,
    termination: Option<String>,
}

#[derive(Serialize)]
struct Intersection {
    delta: f64,
    e0: f64,
    direction: f64,
    s_lo: f64,
    s_hi: f64,
    sign_change: bool,
    dominant_mode: usize,
    s: f64,
    lambda: f64,
    q0: f64,
    /// Residual of the stored point, recomputed from scratch.
    residual_norm: f64,
    null_vector: Vec<f64>,
    test_lo: ehdwaves_core::continuation::TestFunction,
    test_hi: ehdwaves_core::continuation::TestFunction,
}

#[derive(Serialize)]
struct SecondarySummary<'a> {
    #[serde(flatten)]
    meta: &'a DatasetMeta,
    status: &'static str,
    k: usize,
    l: usize,
    sign: BranchSign,
    e_field: f64,
    lambda_star: f64,
    attempts: Vec<Attempt>,
    secondary_rows: usize,
    secondary_termination: Option<String>,
}

pub fn cmd_secondary(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "secondary");
    let r = &cfg.resonance;
    let base = cfg.params;
    let rec = match nondegeneracy_checks(mode(r.k), mode(r.l), &base) {
        Ok(rec) => rec,
        Err(e @ (WaveError::VorticityRequired | WaveError::NoResonance { .. } | WaveError::SameMode(_))) => {
            return Err(CliError::Config(vec![ConfigIssue { line: None, key: "physics.gamma".into(), message: e.to_string() }]));
        }
        Err(e) => return Err(e.into()),
    };
    let e0_sign = if base.e0 < 0.0 { -1.0 } else { 1.0 };
    let mut attempts = Vec::new();
    let mut last_primary: Option<(Branch, usize)> = None;
    for &delta in &r.deltas {
        let p = base.with_e0(e0_sign * (rec.e_field * (1.0 + delta)).sqrt());
        let prob = WaveProblem::new(p, cfg.numerics.m, cfg.numerics.n)?;
        let bp = BifurcationPoint::new(rec.k, rec.sign, &p, prob.modes())?;
        if !bp.is_simple() {
            continue;
        }
        for dir in [cfg.branch.direction, -cfg.branch.direction] {
            let opts = ehdwaves_core::ContinuationOptions { direction: dir, ..cfg.continuation() };
            let primary = continue_branch(&bp, &prob, &opts)?;
            attempts.push(Attempt {
                delta,
                e0: p.e0,
                direction: dir,
                rows: primary.points.len(),
                reached: primary.reached(),
                events: primary.events.iter().map(EventSummary::from).collect(),
                termination: primary.termination.as_ref().map(|e| e.to_string()),
            });
            let event = primary.events.iter().find(|e| e.sign_change && e.dominant_mode == r.l).cloned();
            let Some(event) = event else {
                last_primary = Some((primary, prob.modes()));
                continue;
            };
            let pcsv = t.path("primary.csv");
            branch_dataset(&primary, &t.meta, prob.modes()).write(&pcsv)?;
            let residual = assemble_residual(&event.point.state, &p, &prob.disc)?.sup_norm();
            let report = Intersection {
                delta,
                e0: p.e0,
                direction: dir,
                s_lo: event.s_lo,
                s_hi: event.s_hi,
                sign_change: event.sign_change,
                dominant_mode: event.dominant_mode,
                s: event.point.s,
                lambda: event.point.state.lambda,
                q0: event.point.state.q0,
                residual_norm: residual,
                null_vector: event.null_vector.clone(),
                test_lo: event.test_lo,
                test_hi: event.test_hi,
            };
            let ijson = t.path("intersection.json");
            write_json(&ijson, &report)?;
            let switched = switch_branch(&event, &primary, &prob, &opts);
            let (status, secondary, failure) = match switched {
                Ok(sec) => ("ok", Some(sec), None),
                Err(e) => ("switch-failed", None, Some(e)),
            };
            let mut files = vec![pcsv, ijson];
            if let Some(sec) = &secondary {
                let scsv = t.path("secondary.csv");
                branch_dataset(sec, &t.meta, prob.modes()).write(&scsv)?;
                files.push(scsv);
            }
            let sjson = t.path("summary.json");
            write_json(
                &sjson,
                &SecondarySummary {
                    meta: &t.meta,
                    status,
                    k: r.k,
                    l: r.l,
                    sign: rec.sign,
                    e_field: rec.e_field,
                    lambda_star: rec.lambda_star,
                    attempts: attempts.clone(),
                    secondary_rows: secondary.as_ref().map_or(0, |s| s.points.len()),
                    secondary_termination: secondary.as_ref().and_then(|s| s.termination.as_ref().map(|e| e.to_string())),
                },
            )?;
            files.push(sjson);
            return match failure {
                None => Ok(Outcome { dir: t.dir, files }),
                Some(e) => Err(e.into()),
            };
        }
    }
    if let Some((primary, modes)) = &last_primary {
        branch_dataset(primary, &t.meta, *modes).write(&t.path("primary.csv"))?;
    }
    write_json(
        &t.path("summary.json"),
        &SecondarySummary {
            meta: &t.meta,
            status: "no-event",
            k: r.k,
            l: r.l,
            sign: rec.sign,
            e_field: rec.e_field,
            lambda_star: rec.lambda_star,
            attempts,
            secondary_rows: 0,
            secondary_termination: None,
        },
    )?;
    Err(CliError::NoEvent { dir: t.dir })
}

/// One line of the sweep index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: usize,
    pub k: usize,
    pub sign: BranchSign,
    pub e0: f64,
    pub gamma: f64,
    /// `ok`, `truncated` or `failed`.
    pub status: String,
    pub rows: usize,
    pub reached: f64,
    pub lambda_star: Option<f64>,
    pub message: Option<String>,
    pub file: String,
}

struct Job {
    id: usize,
    k: usize,
    sign: BranchSign,
    e0: f64,
    gamma: f64,
}

fn run_job(job: &Job, cfg: &RunConfig, meta: &DatasetMeta, jobs_dir: &Path, resume: bool) -> Result<JobRecord, CliError> {
    let stem = format!("job-{:04}", job.id);
    let sidecar = jobs_dir.join(format!("{stem}.json"));
    if resume && sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar).map_err(CliError::io(&sidecar))?;
        if let Ok(rec) = serde_json::from_str::<JobRecord>(&text) {
            // a stored job counts only if it already reaches this run's extent
            if rec.status == "ok" && rec.reached.abs() >= cfg.numerics.smax * (1.0 - 1e-12) {
                return Ok(rec);
            }
        }
    }
    let mut rec = JobRecord {
        id: job.id,
        k: job.k,
        sign: job.sign,
        e0: job.e0,
        gamma: job.gamma,
        status: "failed".into(),
        rows: 0,
        reached: 0.0,
        lambda_star: None,
        message: None,
        file: format!("jobs/{stem}.csv"),
    };
    let outcome = (|| -> Result<Branch, WaveError> {
        let p = cfg.params.with_e0(job.e0).with_gamma(job.gamma);
        let prob = WaveProblem::new(p, cfg.numerics.m, cfg.numerics.n)?;
        let bp = BifurcationPoint::new(mode(job.k), job.sign, &p, prob.modes())?;
        continue_branch(&bp, &prob, &cfg.continuation())
    })();
    match outcome {
        Ok(branch) => {
            branch_dataset(&branch, meta, cfg.numerics.modes()).write(&jobs_dir.join(format!("{stem}.csv")))?;
            rec.rows = branch.points.len();
            rec.reached = branch.reached();
            rec.lambda_star = Some(branch.origin.lambda_star);
            rec.message = branch.termination.as_ref().map(|e| e.to_string());
            rec.status = if branch.termination.is_some() { "truncated" } else { "ok" }.into();
        }
        Err(e) => {
            rec.message = Some(e.to_string());
            rec.file = String::new();
        }
    }
    write_json(&sidecar, &rec)?;
    Ok(rec)
}

pub fn cmd_sweep(cfg: &RunConfig, ctx: &RunContext) -> Result<Outcome, CliError> {
    let t = Target::new(cfg, ctx, "sweep");
    let w = &cfg.sweep;
    let mut jobs = Vec::new();
    for &k in &w.ks {
        for &sign in &w.signs {
            for &e0 in &w.e0s {
                for &gamma in &w.gammas {
                    jobs.push(Job { id: jobs.len(), k, sign, e0, gamma });
                }
            }
        }
    }
    let jobs_dir = t.dir.join("jobs");
    let threads = ctx.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Other(e.to_string()))?;
    let records: Vec<JobRecord> =
        pool.install(|| jobs.par_iter().map(|j| run_job(j, cfg, &t.meta, &jobs_dir, ctx.resume)).collect::<Result<_, _>>())?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.k.to_string(),
                r.sign.label().into(),
                fmt_f(r.e0),
                fmt_f(r.gamma),
                r.status.clone(),
                r.rows.to_string(),
                fmt_f(r.reached),
                opt_f(r.lambda_star),
                r.file.clone(),
                r.message.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let header = strings(&["id", "k", "sign", "e0", "gamma", "status", "rows", "reached", "lambda_star", "file", "message"]);
    let index = t.path("index.csv");
    write_table(&index, &t.meta, &header, &rows)?;
    let failed = records.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        return Err(CliError::Truncated { reason: format!("{failed} of {} jobs did not complete", records.len()), dir: t.dir });
    }
    let mut files = vec![index];
    files.extend(records.iter().map(|r| t.dir.join(&r.file)));
    Ok(Outcome { dir: t.dir, files })
}
