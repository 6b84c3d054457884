use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ehdwaves_cli::dataset::read_table;
use ehdwaves_cli::{exit, BranchDataset};
use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = "[numerics]\nM = 32\nN = 24\n";

struct Run {
    out: Output,
    dir: Option<PathBuf>,
}

impl Run {
    fn code(&self) -> i32 {
        self.out.status.code().expect("exited normally")
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.out.stderr).into_owned()
    }

    fn dir(&self) -> &Path {
        self.dir.as_deref().expect("dataset directory")
    }
}

fn ehdwaves(tmp: &TempDir, config: &str, args: &[&str]) -> Run {
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ehdwaves"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .env_remove(ehdwaves_cli::JOBS_ENV)
        .output()
        .unwrap();
    // the dataset directory is named in the error message when a run stops early
    let dir = tmp.path().join("out").read_dir().ok().and_then(|mut d| d.next()).map(|e| e.unwrap().path());
    Run { out, dir }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.contains("created_unix")).collect::<Vec<_>>().join("\n")
}

#[test]
fn dispersion_roots_match_closed_form() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[physics]\ne0 = 0\ngamma = 0\n[numerics]\nkmax = 3\n", &["dispersion"]);
    assert_eq!(run.code(), exit::OK, "{}", run.stderr());
    let side = json(&run.dir().join("dispersion.json"));
    let roots = side["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
    for (i, r) in roots.iter().enumerate() {
        let k = (i + 1) as f64;
        let speed = ((1.0 + k * k) * k.tanh() / k).sqrt();
        assert!((r["plus"].as_f64().unwrap() - speed).abs() < 1e-14);
        assert!((r["minus"].as_f64().unwrap() + speed).abs() < 1e-14);
    }
    assert!(side["warnings"].as_array().unwrap().is_empty());
    let table = read_table(&run.dir().join("dispersion.csv")).unwrap();
    assert_eq!(table.rows.len(), 3 * 61);
}

#[test]
fn empty_mode_range_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[numerics]\nkmax = 3\n[dispersion]\nkmin = 4\n", &["dispersion"]);
    assert_eq!(run.code(), exit::OK);
    let text = fs::read_to_string(run.dir().join("dispersion.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, vec!["k,lambda,D_k"]);
}

#[test]
fn inadmissible_field_is_reported_in_sidecar() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[physics]\ne0 = 3\n[numerics]\nkmax = 3\n", &["dispersion"]);
    assert_eq!(run.code(), exit::OK);
    let side = json(&run.dir().join("dispersion.json"));
    let warnings = side["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("inadmissible")));
}

#[test]
fn reruns_are_identical_apart_from_timestamp() {
    let tmp = TempDir::new().unwrap();
    let cfg = format!("{SMALL}[physics]\ngamma = 0.3\n");
    let first = ehdwaves(&tmp, &cfg, &["branch"]);
    assert_eq!(first.code(), exit::OK);
    let files = ["branch.csv", "summary.json"];
    let before: Vec<String> = files.iter().map(|f| without_timestamp(&first.dir().join(f))).collect();
    let second = ehdwaves(&tmp, &cfg, &["branch"]);
    assert_eq!(second.dir(), first.dir());
    let after: Vec<String> = files.iter().map(|f| without_timestamp(&second.dir().join(f))).collect();
    assert_eq!(before, after);
}

#[test]
fn config_errors_are_aggregated_with_lines() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[physics]\nsigma = -1\neps0 = x\n[numerics]\nM = 9\n", &["points"]);
    assert_eq!(run.code(), exit::CONFIG);
    let err = run.stderr();
    assert!(err.contains("line 2: physics.sigma: must be >= 0"), "{err}");
    assert!(err.contains("line 3: physics.eps0"), "{err}");
    assert!(err.contains("line 5: numerics.M"), "{err}");
    assert!(run.dir.is_none());
}

#[test]
fn unknown_keys_only_warn() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[physics]\ncolour = blue\n", &["dispersion"]);
    assert_eq!(run.code(), exit::OK);
    assert!(run.stderr().contains("warning: line 2: physics.colour"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_ehdwaves")).args(["points", "--config", "/nonexistent/run.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(exit::OTHER));
}

#[test]
fn branch_summary_reports_negative_curvature() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, &format!("{SMALL}[physics]\ngamma = 0\n[branch]\nk = 1\nsign = plus\n"), &["branch"]);
    assert_eq!(run.code(), exit::OK);
    let summary = json(&run.dir().join("summary.json"));
    let fitted = summary["fit"]["lambda_double_prime"].as_f64().unwrap();
    assert!(fitted < 0.0);
    let expansion = summary["expansion_lambda_double_prime"].as_f64().unwrap();
    assert!((fitted - expansion).abs() < 1e-3 * expansion.abs());
    assert!(summary["fit"]["lambda_prime"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn zero_extent_gives_single_row() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, &format!("{SMALL}smax = 0\n"), &["branch"]);
    assert_eq!(run.code(), exit::OK);
    let ds = BranchDataset::read(&run.dir().join("branch.csv")).unwrap();
    assert_eq!(ds.points.len(), 1);
    assert_eq!(ds.points[0].s, 0.0);
    assert_eq!(ds.labels, vec!["neutral"]);
    assert!(json(&run.dir().join("summary.json"))["fit"].is_null());
}

#[test]
fn resume_appends_rows() {
    let tmp = TempDir::new().unwrap();
    let short = ehdwaves(&tmp, &format!("{SMALL}smax = 4e-3\n"), &["branch"]);
    assert_eq!(short.code(), exit::OK);
    let path = short.dir().join("branch.csv");
    let first = read_table(&path).unwrap().rows;
    let resumed = ehdwaves(&tmp, &format!("{SMALL}smax = 1e-2\n"), &["branch", "--resume"]);
    assert_eq!(resumed.code(), exit::OK, "{}", resumed.stderr());
    assert_eq!(resumed.dir(), short.dir());
    let second = read_table(&path).unwrap().rows;
    assert!(second.len() > first.len());
    assert_eq!(&second[..first.len()], &first[..]);
    let summary = json(&short.dir().join("summary.json"));
    assert_eq!(summary["resumed_rows"].as_u64().unwrap() as usize, first.len());
    assert_eq!(summary["rows"].as_u64().unwrap() as usize, second.len());
    // resuming at the same extent adds nothing
    let again = ehdwaves(&tmp, &format!("{SMALL}smax = 1e-2\n"), &["branch", "--resume"]);
    assert_eq!(again.code(), exit::OK);
    assert_eq!(read_table(&path).unwrap().rows, second);
}

#[test]
fn failed_continuation_leaves_truncated_dataset() {
    let tmp = TempDir::new().unwrap();
    let cfg = "[numerics]\nM = 16\nN = 12\nsmax = 0.95\ninitial_step = 0.05\nmax_step = 0.2\n";
    let run = ehdwaves(&tmp, cfg, &["branch"]);
    assert_eq!(run.code(), exit::NUMERICAL);
    let ds = BranchDataset::read(&run.dir().join("branch.csv")).unwrap();
    let failure = ds.failure.expect("failure row");
    assert_eq!(failure.s, ds.points.last().unwrap().s);
    assert!(!failure.reason.is_empty());
    assert!(ds.points.iter().all(|p| p.residual_norm <= 1e-10));
    assert!(json(&run.dir().join("summary.json"))["termination"].is_string());
}

#[test]
fn stability_labels_flip_across_the_crossing() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, &format!("{SMALL}[stability]\nsamples = 3\n"), &["stability"]);
    assert_eq!(run.code(), exit::OK, "{}", run.stderr());
    let t = read_table(&run.dir().join("trivial.csv")).unwrap();
    let labels: Vec<&str> = t.rows.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(labels, vec!["unstable", "neutral", "formally_stable"]);
    let b = read_table(&run.dir().join("branch_stability.csv")).unwrap();
    assert_eq!(b.rows[0][3], "neutral");
}

fn tk(k: f64) -> f64 {
    k.tanh() / k
}

#[test]
fn resonance_atlas_columns() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[resonance]\ngammas = 1e-3, 2, 3\natlas_kmax = 3\n", &["resonance-atlas"]);
    assert_eq!(run.code(), exit::OK, "{}", run.stderr());
    let t = read_table(&run.dir().join("atlas.csv")).unwrap();
    assert_eq!(t.header, vec!["k", "l", "gamma", "E_kl", "resonance_condition_holds", "det1", "det2", "note"]);
    assert_eq!(t.rows.len(), 6 * 3);
    let find = |k: &str, l: &str, g: &str| t.rows.iter().find(|r| r[0] == k && r[1] == l && r[2] == g).unwrap();
    let mut certified = 0;
    for r in &t.rows {
        let gamma: f64 = r[2].parse().unwrap();
        if gamma < 0.01 {
            assert_eq!(r[4], "false");
        }
        if r[4] == "false" {
            assert!(r[5].is_empty() && r[6].is_empty());
            continue;
        }
        assert_eq!(find(&r[1], &r[0], &r[2])[3], r[3]);
        let (k, l): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let e0 = r[3].parse::<f64>().unwrap().sqrt();
        let closed = 8.0 * gamma * e0 * (tk(l) - tk(k)) / (tk(k) * tk(l));
        let det1: f64 = r[5].parse().unwrap();
        assert!((det1 - closed).abs() <= 1e-8 * closed.abs(), "{r:?}");
        certified += r[7].is_empty() as usize;
    }
    assert!(certified >= 1);
    let (k2l1, k1l2) = (find("2", "1", "2.0000000000000000e0"), find("1", "2", "2.0000000000000000e0"));
    assert!((k2l1[3].parse::<f64>().unwrap() - 1.423416465).abs() < 1e-9);
    assert!(k2l1[7].is_empty());
    assert_eq!(k1l2[7], "degenerate determinant 2");
}

#[test]
fn resonance_grid_must_exclude_zero() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, "[resonance]\ngammas = 0, 1\n", &["resonance-atlas"]);
    assert_eq!(run.code(), exit::CONFIG);
    assert!(run.stderr().contains("line 2: resonance.gammas"));
}

#[test]
fn secondary_pipeline_writes_both_branches() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, &format!("{SMALL}[physics]\ngamma = 2\n[resonance]\nk = 2\nl = 1\ndelta = 1e-2\n"), &["secondary"]);
    assert_eq!(run.code(), exit::OK, "{}", run.stderr());
    let summary = json(&run.dir().join("summary.json"));
    assert_eq!(summary["status"], "ok");
    let report = json(&run.dir().join("intersection.json"));
    assert!(report["residual_norm"].as_f64().unwrap() <= 1e-10);
    assert_eq!(report["dominant_mode"], 1);
    let sec = BranchDataset::read(&run.dir().join("secondary.csv")).unwrap();
    assert!(sec.points.len() >= 5);
    assert!(sec.points.iter().all(|p| p.state.eta.coeff(1).abs() >= 1e-4 && p.state.eta.coeff(2).abs() >= 1e-4));
    let primary = BranchDataset::read(&run.dir().join("primary.csv")).unwrap();
    assert!(primary.points.iter().all(|p| p.state.eta.coeff(1).abs() <= 1e-10));
}

#[test]
fn distant_offset_reports_no_event() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, &format!("{SMALL}[physics]\ngamma = 2\n[resonance]\ndelta = 0.5\n"), &["secondary"]);
    assert_eq!(run.code(), exit::NO_EVENT);
    let summary = json(&run.dir().join("summary.json"));
    assert_eq!(summary["status"], "no-event");
    assert_eq!(summary["attempts"].as_array().unwrap().len(), 2);
    assert!(run.dir().join("primary.csv").exists());
    assert!(!run.dir().join("secondary.csv").exists());
}

#[test]
fn secondary_without_vorticity_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, SMALL, &["secondary"]);
    assert_eq!(run.code(), exit::CONFIG);
    assert!(run.stderr().contains("physics.gamma"));
}

#[test]
fn resonant_points_are_flagged_and_refused() {
    let tmp = TempDir::new().unwrap();
    let e0 = 1.423416465065621f64.sqrt();
    let cfg = format!("{SMALL}kmax = 2\n[physics]\ngamma = 2\ne0 = {e0}\n[branch]\nk = 2\n");
    let run = ehdwaves(&tmp, &cfg, &["points"]);
    assert_eq!(run.code(), exit::OK, "{}", run.stderr());
    let t = read_table(&run.dir().join("points.csv")).unwrap();
    let row = t.rows.iter().find(|r| r[0] == "2" && r[1] == "plus").unwrap();
    assert_eq!(row[3], "2");
    assert_eq!(row[4], "1");
    assert!(row[5].is_empty());
    let branch = ehdwaves(&tmp, &cfg, &["branch"]);
    assert_eq!(branch.code(), exit::NUMERICAL);
    assert!(branch.stderr().contains("two-dimensional kernel"));
}

fn sweep(tmp: &TempDir, jobs_flag: Option<&str>, jobs_env: Option<&str>) -> (i32, PathBuf) {
    let cfg = tmp.path().join("sweep.cfg");
    fs::write(&cfg, format!("{SMALL}smax = 4e-3\n[sweep]\nk = 1, 2\nsign = plus, minus\ne0 = 0.3\ngamma = 0, 0.5\n")).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ehdwaves"));
    cmd.args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("out"));
    cmd.env_remove(ehdwaves_cli::JOBS_ENV);
    if let Some(n) = jobs_flag {
        cmd.args(["--jobs", n]);
    }
    if let Some(n) = jobs_env {
        cmd.env(ehdwaves_cli::JOBS_ENV, n);
    }
    let out = cmd.output().unwrap();
    let dir = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    (out.status.code().unwrap(), dir)
}

#[test]
fn sweep_jobs_are_independent_of_worker_count() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (code_a, dir_a) = sweep(&a, Some("1"), None);
    let (code_b, dir_b) = sweep(&b, None, Some("3"));
    assert_eq!((code_a, code_b), (exit::OK, exit::OK));
    let index = read_table(&dir_a.join("index.csv")).unwrap();
    assert_eq!(index.rows.len(), 8);
    assert!(index.rows.iter().all(|r| r[5] == "ok"));
    for r in &index.rows {
        assert_eq!(without_timestamp(&dir_a.join(&r[9])), without_timestamp(&dir_b.join(&r[9])));
    }
    assert_eq!(without_timestamp(&dir_a.join("index.csv")), without_timestamp(&dir_b.join("index.csv")));
}

#[test]
fn sweep_resume_reuses_finished_jobs() {
    let tmp = TempDir::new().unwrap();
    let (code, dir) = sweep(&tmp, Some("2"), None);
    assert_eq!(code, exit::OK);
    let job = dir.join("jobs/job-0000.csv");
    let stamp = fs::read_to_string(&job).unwrap();
    std::thread::sleep(std::time::Duration::from_millis(1100));
    let cfg = tmp.path().join("sweep.cfg");
    let out = Command::new(env!("CARGO_BIN_EXE_ehdwaves"))
        .args(["sweep", "--resume", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::OK));
    // untouched, timestamp included
    assert_eq!(fs::read_to_string(&job).unwrap(), stamp);
}

#[test]
fn zero_workers_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let run = ehdwaves(&tmp, SMALL, &["sweep", "--jobs", "0"]);
    assert_eq!(run.code(), exit::CONFIG);
}
