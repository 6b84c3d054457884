use ehdwaves_cli::dataset::{fmt_f, read_table, write_table, FailureRow};
use ehdwaves_cli::{validate_config, BranchDataset, DatasetMeta};
use ehdwaves_core::{continue_branch, mode, BifurcationPoint, BranchSign, ContinuationOptions, WaveParams, WaveProblem};
use tempfile::TempDir;

#[test]
fn branch_round_trips_exactly() {
    let prob = WaveProblem::new(WaveParams::new(1.0, 1.0, 0.4, 1.0, 0.3).unwrap(), 32, 24).unwrap();
    let bp = BifurcationPoint::new(mode(2), BranchSign::Minus, &prob.params, prob.modes()).unwrap();
    let branch = continue_branch(&bp, &prob, &ContinuationOptions::default()).unwrap();
    let ds = BranchDataset {
        meta: DatasetMeta::new("branch", "0123456789abcdef"),
        modes: prob.modes(),
        points: branch.points.clone(),
        labels: vec!["formally_stable".into(); branch.points.len()],
        failure: Some(FailureRow { s: branch.reached(), reason: "cut, with a comma".into() }),
    };
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("b.csv");
    ds.write(&path).unwrap();
    let back = BranchDataset::read(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.points, branch.points);
    // a second write of the reloaded table is byte-identical
    let again = tmp.path().join("c.csv");
    back.write(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn floats_survive_formatting() {
    for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MIN_POSITIVE, f64::MAX, 6.02214076e23, f64::EPSILON] {
        assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
    }
    assert!(fmt_f(f64::NAN).parse::<f64>().unwrap().is_nan());
}

#[test]
fn header_carries_hash() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("t.csv");
    let meta = DatasetMeta::new("points", "feedbeef00000000");
    write_table(&path, &meta, &["a".to_string()], &[vec!["1".into()]]).unwrap();
    let t = read_table(&path).unwrap();
    assert_eq!(t.meta, meta);
    assert_eq!(t.rows, vec![vec!["1".to_string()]]);
}

#[test]
fn minimal_config_gets_documented_defaults() {
    let report = validate_config("[physics]\ngamma = 0.2\n").unwrap();
    let n = &report.config.numerics;
    assert_eq!((n.m, n.n, n.newton_tol), (64, 48, 1e-10));
    assert!(report.warnings.is_empty());
}

#[test]
fn hash_tracks_config() {
    let a = validate_config("[physics]\ngamma = 0.2\n").unwrap().config;
    let b = validate_config("# same values, different text\n[physics]\ngamma=2e-1\n").unwrap().config;
    assert_eq!(a.config_hash("branch"), b.config_hash("branch"));
    let c = validate_config("[output]\nseed = 7\n[physics]\ngamma = 0.2\n").unwrap().config;
    assert_ne!(a.config_hash("branch"), c.config_hash("branch"));
}
