//! Run configuration: `key = value` lines grouped under `[section]` headers. `#` starts a comment.
//!
//! Validation collects every problem before reporting, each anchored to its line when the value
//! came from the file. Unknown keys are warnings so older binaries accept newer files.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use ehdwaves_core::{BranchSign, ContinuationOptions, WaveParams};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    /// `section.key`, or empty for structural problems.
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.line {
            write!(f, "line {n}: ")?;
        }
        if !self.key.is_empty() {
            write!(f, "{}: ", self.key)?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub m: usize,
    pub n: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub smax: f64,
    pub kmax: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { m: 64, n: 48, newton_tol: 1e-10, max_newton: 15, initial_step: 1e-3, max_step: 4e-3, smax: 1e-2, kmax: 3 }
    }
}

impl Numerics {
    pub fn modes(&self) -> usize {
        (self.m / 2).saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSelection {
    pub k: usize,
    pub sign: BranchSign,
    pub direction: f64,
}

impl Default for BranchSelection {
    fn default() -> Self {
        Self { k: 1, sign: BranchSign::Plus, direction: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionGrid {
    pub kmin: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
}

impl Default for DispersionGrid {
    fn default() -> Self {
        Self { kmin: 1, lambda_min: -3.0, lambda_max: 3.0, lambda_points: 61 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityWindow {
    /// Speeds λ* ± half_width are classified on the flat state.
    pub half_width: f64,
    pub samples: usize,
}

impl Default for StabilityWindow {
    fn default() -> Self {
        Self { half_width: 1e-2, samples: 11 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSelection {
    pub k: usize,
    pub l: usize,
    /// Relative offsets of E₀² from E_{k,l}, tried in order.
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub atlas_kmax: usize,
}

impl Default for ResonanceSelection {
    fn default() -> Self {
        Self { k: 2, l: 1, deltas: vec![1e-2, -1e-2], gammas: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0], atlas_kmax: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub ks: Vec<usize>,
    pub signs: Vec<BranchSign>,
    pub e0s: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { ks: vec![1], signs: vec![BranchSign::Plus], e0s: vec![0.0], gammas: vec![0.0] }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct RunConfig {
    pub params: WaveParams,
    pub numerics: Numerics,
    pub branch: BranchSelection,
    pub dispersion: DispersionGrid,
    pub stability: StabilityWindow,
    pub resonance: ResonanceSelection,
    pub sweep: SweepGrid,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}


#[derive(Debug, Clone, PartialEq)]
pub struct ConfigReport {
    pub config: RunConfig,
    pub warnings: Vec<ConfigIssue>,
}

fn num(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got `{v}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be finite, got `{v}`"))
    }
}

fn int(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("expected a nonnegative integer, got `{v}`"))
}

fn direction(v: &str) -> Result<f64, String> {
    match v {
        "1" | "+1" | "forward" => Ok(1.0),
        "-1" | "backward" => Ok(-1.0),
        _ => Err(format!("expected 1 or -1, got `{v}`")),
    }
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(|s| item(s.trim())).collect()
}

/// Stores one value; None when the key is unknown.
fn assign(c: &mut RunConfig, section: &str, key: &str, v: &str) -> Option<Result<(), String>> {
    let r = match (section, key) {
        ("physics", "g") => num(v).map(|x| c.params.g = x),
        ("physics", "sigma") => num(v).map(|x| c.params.sigma = x),
        ("physics", "gamma") => num(v).map(|x| c.params.gamma = x),
        ("physics", "eps0") => num(v).map(|x| c.params.eps0 = x),
        ("physics", "e0") => num(v).map(|x| c.params.e0 = x),
        ("numerics", "M") => int(v).map(|x| c.numerics.m = x),
        ("numerics", "N") => int(v).map(|x| c.numerics.n = x),
        ("numerics", "newton_tol") => num(v).map(|x| c.numerics.newton_tol = x),
        ("numerics", "max_newton") => int(v).map(|x| c.numerics.max_newton = x),
        ("numerics", "initial_step") => num(v).map(|x| c.numerics.initial_step = x),
        ("numerics", "max_step") => num(v).map(|x| c.numerics.max_step = x),
        ("numerics", "smax") => num(v).map(|x| c.numerics.smax = x),
        ("numerics", "kmax") => int(v).map(|x| c.numerics.kmax = x),
        ("branch", "k") => int(v).map(|x| c.branch.k = x),
        ("branch", "sign") => v.parse().map(|x| c.branch.sign = x),
        ("branch", "direction") => direction(v).map(|x| c.branch.direction = x),
        ("dispersion", "kmin") => int(v).map(|x| c.dispersion.kmin = x),
        ("dispersion", "lambda_min") => num(v).map(|x| c.dispersion.lambda_min = x),
        ("dispersion", "lambda_max") => num(v).map(|x| c.dispersion.lambda_max = x),
        ("dispersion", "lambda_points") => int(v).map(|x| c.dispersion.lambda_points = x),
        ("stability", "half_width") => num(v).map(|x| c.stability.half_width = x),
        ("stability", "samples") => int(v).map(|x| c.stability.samples = x),
        ("resonance", "k") => int(v).map(|x| c.resonance.k = x),
        ("resonance", "l") => int(v).map(|x| c.resonance.l = x),
        ("resonance", "delta") => list(v, num).map(|x| c.resonance.deltas = x),
        ("resonance", "gammas") => list(v, num).map(|x| c.resonance.gammas = x),
        ("resonance", "atlas_kmax") => int(v).map(|x| c.resonance.atlas_kmax = x),
        ("sweep", "k") => list(v, int).map(|x| c.sweep.ks = x),
        ("sweep", "sign") => list(v, |s| s.parse()).map(|x| c.sweep.signs = x),
        ("sweep", "e0") => list(v, num).map(|x| c.sweep.e0s = x),
        ("sweep", "gamma") => list(v, num).map(|x| c.sweep.gammas = x),
        ("output", "dir") => {
            c.output_dir = Some(PathBuf::from(v));
            Ok(())
        }
        ("output", "seed") => v.parse().map(|x| c.seed = x).map_err(|_| format!("expected an unsigned integer, got `{v}`")),
        _ => return None,
    };
    Some(r)
}

/// Parses and validates configuration text, reporting every problem at once.
pub fn validate_config(text: &str) -> Result<ConfigReport, Vec<ConfigIssue>> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => errors.push(ConfigIssue { line: Some(line), key: String::new(), message: format!("malformed section header `{body}`") }),
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            errors.push(ConfigIssue { line: Some(line), key: String::new(), message: format!("expected `key = value`, got `{body}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if let Some(first) = seen.get(&full) {
            errors.push(ConfigIssue { line: Some(line), key: full, message: format!("duplicate key (first set on line {first})") });
            continue;
        }
        seen.insert(full.clone(), line);
        match assign(&mut cfg, &section, key, value) {
            None => warnings.push(ConfigIssue { line: Some(line), key: full, message: "unknown key ignored".into() }),
            Some(Err(message)) => errors.push(ConfigIssue { line: Some(line), key: full, message }),
            Some(Ok(())) => {}
        }
    }
    // range checks only make sense on values that parsed
    let parsed_bad: Vec<String> = errors.iter().map(|e| e.key.clone()).collect();
    errors.extend(check_ranges(&cfg, &seen).into_iter().filter(|e| !parsed_bad.contains(&e.key)));
    if errors.is_empty() {
        Ok(ConfigReport { config: cfg, warnings })
    } else {
        errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        Err(errors)
    }
}

fn check_ranges(c: &RunConfig, lines: &HashMap<String, usize>) -> Vec<ConfigIssue> {
    let mut out = Vec::new();
    let mut need = |ok: bool, key: &str, message: String| {
        if !ok {
            out.push(ConfigIssue { line: lines.get(key).copied(), key: key.into(), message });
        }
    };
    let p = &c.params;
    need(p.g > 0.0, "physics.g", format!("must be > 0, got {}", p.g));
    need(p.sigma >= 0.0, "physics.sigma", format!("must be >= 0, got {}", p.sigma));
    need(p.eps0 > 0.0, "physics.eps0", format!("must be > 0, got {}", p.eps0));

    let n = &c.numerics;
    // mode bounds derive from M, so a bad M must not cascade into them
    let modes = if n.m >= 8 && n.m.is_multiple_of(2) { n.modes() } else { usize::MAX };
    need(n.m >= 8 && n.m.is_multiple_of(2), "numerics.M", format!("must be even and >= 8, got {}", n.m));
    need(n.n >= 8, "numerics.N", format!("must be >= 8, got {}", n.n));
    need(n.newton_tol > 0.0 && n.newton_tol <= 1e-2, "numerics.newton_tol", format!("must lie in (0, 1e-2], got {}", n.newton_tol));
    need(n.max_newton >= 1, "numerics.max_newton", "must be >= 1".into());
    need(n.initial_step > 0.0, "numerics.initial_step", format!("must be > 0, got {}", n.initial_step));
    need(n.max_step >= n.initial_step, "numerics.max_step", format!("must be >= initial_step ({}), got {}", n.initial_step, n.max_step));
    need(n.smax >= 0.0 && n.smax < 1.0, "numerics.smax", format!("must lie in [0, 1), got {}", n.smax));
    need(n.kmax >= 1 && n.kmax <= modes, "numerics.kmax", format!("must lie in 1..={modes} for M = {}, got {}", n.m, n.kmax));

    let b = &c.branch;
    need(b.k >= 1 && b.k <= modes, "branch.k", format!("must lie in 1..={modes} for M = {}, got {}", n.m, b.k));

    let d = &c.dispersion;
    need(d.kmin >= 1, "dispersion.kmin", "must be >= 1".into());
    need(d.lambda_points >= 1, "dispersion.lambda_points", "must be >= 1".into());
    need(
        d.lambda_min < d.lambda_max || (d.lambda_min == d.lambda_max && d.lambda_points == 1),
        "dispersion.lambda_max",
        format!("must exceed lambda_min ({}), got {}", d.lambda_min, d.lambda_max),
    );

    let s = &c.stability;
    need(s.half_width > 0.0, "stability.half_width", format!("must be > 0, got {}", s.half_width));
    need(s.samples >= 1, "stability.samples", "must be >= 1".into());

    let r = &c.resonance;
    need(r.k >= 1 && r.k <= modes, "resonance.k", format!("must lie in 1..={modes}, got {}", r.k));
    need(r.l >= 1 && r.l <= modes, "resonance.l", format!("must lie in 1..={modes}, got {}", r.l));
    need(r.k != r.l, "resonance.l", "must differ from resonance.k".into());
    need(!r.deltas.is_empty(), "resonance.delta", "needs at least one offset".into());
    need(r.deltas.iter().all(|x| *x != 0.0 && *x > -1.0), "resonance.delta", "offsets must be nonzero and > -1".into());
    need(!r.gammas.is_empty(), "resonance.gammas", "needs at least one value".into());
    need(r.gammas.iter().all(|g| *g != 0.0), "resonance.gammas", "must exclude 0: the resonance field divides by gamma^2".into());
    need(r.atlas_kmax >= 2, "resonance.atlas_kmax", "must be >= 2".into());

    let w = &c.sweep;
    need(!w.ks.is_empty() && w.ks.iter().all(|k| *k >= 1 && *k <= modes), "sweep.k", format!("needs modes in 1..={modes}"));
    need(!w.signs.is_empty(), "sweep.sign", "needs at least one sign".into());
    need(!w.e0s.is_empty(), "sweep.e0", "needs at least one value".into());
    need(!w.gammas.is_empty(), "sweep.gamma", "needs at least one value".into());
    out
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn floats(xs: &[f64]) -> String {
    xs.iter().map(|x| float(*x)).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Resolved values that determine a dataset. The continuation extent `smax` and the output
    /// location are left out, so a longer run lands in the same directory and can resume it.
    pub fn canonical(&self) -> String {
        let p = &self.params;
        let n = &self.numerics;
        let mut m = BTreeMap::new();
        m.insert("physics.g", float(p.g));
        m.insert("physics.sigma", float(p.sigma));
        m.insert("physics.gamma", float(p.gamma));
        m.insert("physics.eps0", float(p.eps0));
        m.insert("physics.e0", float(p.e0));
        m.insert("numerics.M", n.m.to_string());
        m.insert("numerics.N", n.n.to_string());
        m.insert("numerics.newton_tol", float(n.newton_tol));
        m.insert("numerics.max_newton", n.max_newton.to_string());
        m.insert("numerics.initial_step", float(n.initial_step));
        m.insert("numerics.max_step", float(n.max_step));
        m.insert("numerics.kmax", n.kmax.to_string());
        m.insert("branch.k", self.branch.k.to_string());
        m.insert("branch.sign", self.branch.sign.label().into());
        m.insert("branch.direction", float(self.branch.direction));
        let d = &self.dispersion;
        m.insert("dispersion.kmin", d.kmin.to_string());
        m.insert("dispersion.lambda_min", float(d.lambda_min));
        m.insert("dispersion.lambda_max", float(d.lambda_max));
        m.insert("dispersion.lambda_points", d.lambda_points.to_string());
        m.insert("stability.half_width", float(self.stability.half_width));
        m.insert("stability.samples", self.stability.samples.to_string());
        let r = &self.resonance;
        m.insert("resonance.k", r.k.to_string());
        m.insert("resonance.l", r.l.to_string());
        m.insert("resonance.delta", floats(&r.deltas));
        m.insert("resonance.gammas", floats(&r.gammas));
        m.insert("resonance.atlas_kmax", r.atlas_kmax.to_string());
        let w = &self.sweep;
        m.insert("sweep.k", w.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
        m.insert("sweep.sign", w.signs.iter().map(|s| s.label()).collect::<Vec<_>>().join(","));
        m.insert("sweep.e0", floats(&w.e0s));
        m.insert("sweep.gamma", floats(&w.gammas));
        m.insert("output.seed", self.seed.to_string());
        m.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of SHA-256 over the subcommand and the canonical form.
    pub fn config_hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        h.update(self.canonical().as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }

    pub fn continuation(&self) -> ContinuationOptions {
        let n = &self.numerics;
        ContinuationOptions {
            tol: n.newton_tol,
            max_newton: n.max_newton,
            initial_step: n.initial_step,
            max_step: n.max_step,
            smax: n.smax,
            direction: self.branch.direction,
            ..ContinuationOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let r = validate_config("").unwrap();
        assert_eq!(r.config, RunConfig::default());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn errors_are_aggregated_and_anchored() {
        let text = "[physics]\nsigma = -1\ng = abc\n[numerics]\nM = 7\nnonsense line\n";
        let errs = validate_config(text).unwrap_err();
        let lines: Vec<_> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![Some(2), Some(3), Some(5), Some(6)]);
        assert!(errs[0].to_string().contains("physics.sigma"));
        assert!(errs[0].to_string().contains(">= 0"));
    }

    #[test]
    fn unknown_keys_warn() {
        let r = validate_config("[physics]\nflavour = 3\n[extra]\nx = 1\n").unwrap();
        assert_eq!(r.warnings.len(), 2);
        assert_eq!(r.warnings[0].line, Some(2));
    }

    #[test]
    fn duplicates_and_lists() {
        let errs = validate_config("[branch]\nk = 1\nk = 2\n").unwrap_err();
        assert!(errs[0].message.contains("line 2"));
        let r = validate_config("[sweep]\nk = 1, 2\nsign = plus, minus\n").unwrap();
        assert_eq!(r.config.sweep.ks, vec![1, 2]);
        assert_eq!(r.config.sweep.signs, vec![BranchSign::Plus, BranchSign::Minus]);
    }

    #[test]
    fn hash_ignores_extent_but_not_physics() {
        let a = validate_config("[numerics]\nsmax = 0.01\n").unwrap().config;
        let b = validate_config("[numerics]\nsmax = 0.02\n").unwrap().config;
        let c = validate_config("[physics]\ngamma = 0.1\n").unwrap().config;
        assert_eq!(a.config_hash("branch"), b.config_hash("branch"));
        assert_ne!(a.config_hash("branch"), c.config_hash("branch"));
        assert_ne!(a.config_hash("branch"), a.config_hash("points"));
    }
}
