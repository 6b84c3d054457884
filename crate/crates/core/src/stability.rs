//! Formal stability: the flat-state spectrum, the crossing eigenvalue, and the eigenvalue tracked
//! along a nontrivial branch.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bifurcation::BifurcationPoint;
use crate::error::{Result, WaveError};
use crate::params::{bifurcation_speeds, dispersion, mode, quadratic_scale, tk, ModeIndex, WaveParams};
use crate::residual::{d_lambda_eta, eta_jacobian, Discretization, ExtendedState};

/// Eigenvalues with |μ| at or below this are neutral along a branch.
pub const NEUTRAL_BAND: f64 = 1e-10;

/// Minimum overlap with the kernel mode for an eigenvector to count as tracked.
pub const TRACKING_OVERLAP: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda: f64,
    /// Mode n ↦ D_n(λ).
    pub eigenvalues: BTreeMap<usize, f64>,
    pub crossing_mode: ModeIndex,
}

pub fn trivial_spectrum(lambda: f64, p: &WaveParams, nmax: usize) -> SpectrumReport {
    let nmax = nmax.max(1);
    let eigenvalues: BTreeMap<usize, f64> = (1..=nmax).map(|n| (n, dispersion(mode(n), lambda, p))).collect();
    let crossing = eigenvalues.iter().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map_or(1, |(n, _)| *n);
    SpectrumReport { lambda, eigenvalues, crossing_mode: mode(crossing) }
}

/// ∂D_k/∂λ at λ*, the speed at which the crossing eigenvalue passes through zero.
pub fn crossing_slope(bp: &BifurcationPoint, p: &WaveParams) -> Result<f64> {
    if !bp.is_simple() {
        return Err(WaveError::TwoDimensionalKernel { k: bp.k.get(), partner: bp.partner_mode.map_or(0, |m| m.get()) });
    }
    // re-derives the roots so a degenerate discriminant is reported
    bifurcation_speeds(bp.k, p)?;
    Ok(d_lambda_eta(bp.k, bp.lambda_star, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    FormallyStable,
    Unstable,
    Neutral,
}

impl Stability {
    pub fn of(mu: f64, band: f64) -> Self {
        if mu.abs() <= band {
            Stability::Neutral
        } else if mu < 0.0 {
            Stability::FormallyStable
        } else {
            Stability::Unstable
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Stability::FormallyStable => "formally_stable",
            Stability::Unstable => "unstable",
            Stability::Neutral => "neutral",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityLabel {
    pub class: Stability,
    pub tracked_eigenvalue: f64,
}

impl StabilityLabel {
    pub fn new(mu: f64, band: f64) -> Self {
        Self { class: Stability::of(mu, band), tracked_eigenvalue: mu }
    }
}

/// Largest mode checked for other roots inside a classification interval.
const ROOT_SEARCH: usize = 10_000;

/// Labels of the flat state at `samples` evenly spaced speeds in [lo, hi] (endpoints included).
pub fn classify_trivial(lo: f64, hi: f64, samples: usize, bp: &BifurcationPoint, p: &WaveParams) -> Result<Vec<(f64, StabilityLabel)>> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut count = 0;
    for n in 1..=ROOT_SEARCH {
        let Ok(Some(s)) = bifurcation_speeds(mode(n), p) else { continue };
        for r in [s.plus, s.minus] {
            if r >= lo && r <= hi && !(n == bp.k.get() && r == bp.lambda_star) {
                count += 1;
            }
        }
    }
    if count > 0 {
        return Err(WaveError::MultipleBifurcationPoints { lo, hi, count: count + 1 });
    }
    let band = 1e-12 * 2.0 / tk(bp.k) * quadratic_scale(bp.k, p);
    let points = match samples {
        0 => vec![],
        1 => vec![0.5 * (lo + hi)],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    };
    Ok(points.into_iter().map(|l| (l, StabilityLabel::new(dispersion(bp.k, l, p), band))).collect())
}

/// A real eigenpair of the η-block selected by its overlap with the kernel mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedEigen {
    pub value: f64,
    /// Unit eigenvector in cosine coefficients (modes 1..K).
    pub vector: DVector<f64>,
    /// |component along cos(kq)|.
    pub overlap: f64,
}

/// Eigenvector of `block` for the (approximate) eigenvalue `mu` by inverse iteration.
fn eigenvector(block: &DMatrix<f64>, mu: f64, seed: &DVector<f64>) -> Option<DVector<f64>> {
    let n = block.nrows();
    let scale = block.amax().max(1.0);
    let mut shift = mu + 1e-13 * scale;
    for _ in 0..4 {
        let lu = (block - DMatrix::identity(n, n) * shift).lu();
        let mut x = seed.clone();
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&x) {
                Some(y) if y.iter().all(|v| v.is_finite()) && y.norm() > 0.0 => x = y.normalize(),
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(x);
        }
        shift += 1e-10 * scale;
    }
    None
}

/// The real eigenvalue of `block` whose eigenvector best aligns with mode k.
pub fn track_mode(block: &DMatrix<f64>, k: usize) -> Result<TrackedEigen> {
    let n = block.nrows();
    let scale = block.amax().max(1.0);
    let seed = DVector::from_fn(n, |i, _| 1.0 + 0.1 * (i as f64).sin());
    let mut best: Option<TrackedEigen> = None;
    for z in block.complex_eigenvalues().iter() {
        if z.im.abs() > 1e-9 * scale {
            continue;
        }
        let Some(v) = eigenvector(block, z.re, &seed) else { continue };
        let overlap = v[k - 1].abs();
        if best.as_ref().is_none_or(|b| overlap > b.overlap) {
            best = Some(TrackedEigen { value: z.re, vector: v, overlap });
        }
    }
    match best {
        Some(b) if b.overlap >= TRACKING_OVERLAP => Ok(b),
        b => Err(WaveError::TrackingLost { overlap: b.map_or(0.0, |b| b.overlap) }),
    }
}

/// Tracked eigenvalue at a state on the mode-k branch. On the flat state it is D_k(λ).
pub fn state_eigen(state: &ExtendedState, k: ModeIndex, p: &WaveParams, disc: &Discretization) -> Result<TrackedEigen> {
    let modes = disc.modes();
    if state.eta.coeffs().iter().all(|c| *c == 0.0) {
        let mut v = DVector::zeros(modes);
        v[k.get() - 1] = 1.0;
        return Ok(TrackedEigen { value: dispersion(k, state.lambda, p), vector: v, overlap: 1.0 });
    }
    let block = eta_jacobian(state, p, disc)?.eta_block();
    track_mode(&block, k.get())
}

/// μ(s) at a converged branch point.
pub fn branch_eigenvalue(state: &ExtendedState, origin: &BifurcationPoint, p: &WaveParams, disc: &Discretization) -> Result<f64> {
    Ok(state_eigen(state, origin.k, p, disc)?.value)
}

/// Labels of every point of a branch from its tracked eigenvalues.
pub fn classify_branch(branch: &crate::continuation::Branch) -> Result<Vec<StabilityLabel>> {
    classify_values(&branch.points.iter().map(|p| p.tracked_eigenvalue).collect::<Vec<_>>())
}

/// Per-point labels from stored tracked eigenvalues; a NaN marks a point where tracking was lost.
pub fn classify_values(mus: &[f64]) -> Result<Vec<StabilityLabel>> {
    mus.iter()
        .map(|&mu| if mu.is_nan() { Err(WaveError::TrackingLost { overlap: 0.0 }) } else { Ok(StabilityLabel::new(mu, NEUTRAL_BAND)) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BranchSign;

    fn params() -> WaveParams {
        WaveParams::new(1.0, 1.0, 0.3, 1.0, 0.4).unwrap()
    }

    #[test]
    fn spectrum_vanishes_at_roots() {
        let p = params();
        for k in 1..5 {
            let s = bifurcation_speeds(mode(k), &p).unwrap().unwrap();
            let r = trivial_spectrum(s.plus, &p, 8);
            assert!(r.eigenvalues[&k].abs() < 1e-12);
            assert_eq!(r.crossing_mode, mode(k));
        }
        assert!(trivial_spectrum(1e4, &p, 8).eigenvalues.values().all(|d| *d < 0.0));
    }

    #[test]
    fn crossing_slope_signs() {
        let p = params();
        for k in 1..4 {
            let plus = BifurcationPoint::new(mode(k), BranchSign::Plus, &p, 8).unwrap();
            let minus = BifurcationPoint::new(mode(k), BranchSign::Minus, &p, 8).unwrap();
            assert!(crossing_slope(&plus, &p).unwrap() < 0.0);
            assert!(crossing_slope(&minus, &p).unwrap() > 0.0);
        }
    }

    #[test]
    fn trivial_pattern_and_guard() {
        let p = params();
        let bp = BifurcationPoint::new(mode(2), BranchSign::Plus, &p, 8).unwrap();
        let l = bp.lambda_star;
        let labels = classify_trivial(l - 0.01, l + 0.01, 3, &bp, &p).unwrap();
        assert_eq!(labels[0].1.class, Stability::Unstable);
        assert_eq!(labels[1].1.class, Stability::Neutral);
        assert_eq!(labels[2].1.class, Stability::FormallyStable);
        assert!(matches!(classify_trivial(-5.0, 5.0, 3, &bp, &p), Err(WaveError::MultipleBifurcationPoints { .. })));
    }

    #[test]
    fn tracking_picks_aligned_eigenvector() {
        let mut a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.01, 5.0]));
        a[(0, 1)] = 0.2;
        a[(2, 1)] = -0.1;
        let t = track_mode(&a, 2).unwrap();
        assert!((t.value - 0.01).abs() < 1e-12);
        assert!(t.overlap > 0.9);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        // eigenvectors (1, ±1)/√2 both overlap 0.707
        assert!(track_mode(&rot, 1).is_ok());
    }
}
