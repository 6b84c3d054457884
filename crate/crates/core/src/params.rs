//! Physical constants and the closed-form algebra of the flat state.
//!
//! Normalization: depth 1, period 2π.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};

/// Physical constants of the two-layer problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub g: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub eps0: f64,
    pub e0: f64,
}

impl WaveParams {
    pub fn new(g: f64, sigma: f64, gamma: f64, eps0: f64, e0: f64) -> Result<Self> {
        let p = Self { g, sigma, gamma, eps0, e0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g", self.g),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("eps0", self.eps0),
            ("e0", self.e0),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(WaveError::InvalidParameter { field: name, reason: format!("must be finite, got {v}") });
            }
        }
        if self.g <= 0.0 {
            return Err(WaveError::InvalidParameter { field: "g", reason: format!("must be > 0, got {}", self.g) });
        }
        if self.sigma < 0.0 {
            return Err(WaveError::InvalidParameter { field: "sigma", reason: format!("must be >= 0, got {}", self.sigma) });
        }
        if self.eps0 <= 0.0 {
            return Err(WaveError::InvalidParameter { field: "eps0", reason: format!("must be > 0, got {}", self.eps0) });
        }
        Ok(())
    }

    pub fn with_e0(mut self, e0: f64) -> Self {
        self.e0 = e0;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    /// ε₀E₀², the electric pressure scale.
    pub fn field_energy(&self) -> f64 {
        self.eps0 * self.e0 * self.e0
    }

    /// (g + σk²)T_k, the restoring term of mode k.
    pub fn restoring(&self, k: ModeIndex) -> f64 {
        let kf = k.as_f64();
        (self.g + self.sigma * kf * kf) * tk(k)
    }
}

impl Default for WaveParams {
    fn default() -> Self {
        Self { g: 1.0, sigma: 1.0, gamma: 0.0, eps0: 1.0, e0: 0.0 }
    }
}

/// Positive wave number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct ModeIndex(u32);

impl ModeIndex {
    pub fn new(k: i64) -> Result<Self> {
        if k < 1 || k > u32::MAX as i64 {
            return Err(WaveError::InvalidMode(k));
        }
        Ok(Self(k as u32))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<u32> for ModeIndex {
    type Error = WaveError;
    fn try_from(v: u32) -> Result<Self> {
        Self::new(v as i64)
    }
}

impl From<ModeIndex> for u32 {
    fn from(m: ModeIndex) -> u32 {
        m.0
    }
}

impl std::fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Shorthand for tests and call sites with literal modes.
pub fn mode(k: usize) -> ModeIndex {
    ModeIndex::new(k as i64).expect("mode index must be >= 1")
}

/// T_k = tanh(k)/k.
pub fn tk(k: ModeIndex) -> f64 {
    let kf = k.as_f64();
    kf.tanh() / kf
}

/// Dispersion symbol D_k(λ, E₀): the multiplier of the flat-state linearization on cos(kq).
pub fn dispersion(k: ModeIndex, lambda: f64, p: &WaveParams) -> f64 {
    let t = tk(k);
    -(2.0 / t) * (lambda * lambda - p.gamma * t * lambda + p.field_energy() - p.restoring(k))
}

/// Coefficient scale of the monic quadratic λ² − γT_kλ + ε₀E₀² − (g+σk²)T_k.
pub fn quadratic_scale(k: ModeIndex, p: &WaveParams) -> f64 {
    let t = tk(k);
    let b = (p.gamma * t).abs();
    1.0f64.max(b * b).max(p.field_energy()).max(p.restoring(k))
}

/// (γ²/4)T_k² + (g+σk²)T_k − ε₀E₀².
pub fn discriminant(k: ModeIndex, p: &WaveParams) -> f64 {
    let t = tk(k);
    0.25 * p.gamma * p.gamma * t * t + p.restoring(k) - p.field_energy()
}

/// The two roots λ*_{k,±} of D_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPair {
    pub plus: f64,
    pub minus: f64,
}

impl SpeedPair {
    pub fn get(&self, sign: BranchSign) -> f64 {
        match sign {
            BranchSign::Plus => self.plus,
            BranchSign::Minus => self.minus,
        }
    }
}

/// Which root of the dispersion quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSign {
    Plus,
    Minus,
}

impl BranchSign {
    pub fn factor(self) -> f64 {
        match self {
            BranchSign::Plus => 1.0,
            BranchSign::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BranchSign::Plus => "plus",
            BranchSign::Minus => "minus",
        }
    }
}

impl std::str::FromStr for BranchSign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "plus" | "+" => Ok(BranchSign::Plus),
            "minus" | "-" => Ok(BranchSign::Minus),
            other => Err(format!("expected plus or minus, got `{other}`")),
        }
    }
}

/// Relative width of the band in which the discriminant counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-14;

/// Bifurcation speeds of mode k. `Ok(None)` when the discriminant is negative.
pub fn bifurcation_speeds(k: ModeIndex, p: &WaveParams) -> Result<Option<SpeedPair>> {
    let disc = discriminant(k, p);
    let t = tk(k);
    let scale = 0.25 * p.gamma * p.gamma * t * t + p.restoring(k) + p.field_energy();
    if disc.abs() <= DEGENERATE_TOL * scale {
        return Err(WaveError::DegenerateRoot { k: k.get(), discriminant: disc });
    }
    if disc < 0.0 {
        return Ok(None);
    }
    let half = 0.5 * p.gamma * t;
    let r = disc.sqrt();
    // the smaller-magnitude root through Vieta avoids cancellation
    let c = p.field_energy() - p.restoring(k);
    let (plus, minus) = if half >= 0.0 {
        let plus = half + r;
        (plus, c / plus)
    } else {
        let minus = half - r;
        (c / minus, minus)
    };
    Ok(Some(SpeedPair { plus, minus }))
}

/// Largest mode checked explicitly before giving up on the tail bound.
const TAIL_CAP: usize = 1_000_000;

/// Certified check of (g+σk²)T_k > ε₀E₀² for every k ≥ 1.
///
/// Modes 1..kmax are checked directly; beyond that, checking continues until σ·k·tanh k alone
/// exceeds ε₀E₀² (it is increasing in k and bounds the left side from below).
pub fn admissible_field(p: &WaveParams, kmax: usize) -> bool {
    first_inadmissible_mode(p, kmax).is_none()
}

/// The first mode violating admissibility, if any.
pub fn first_inadmissible_mode(p: &WaveParams, kmax: usize) -> Option<usize> {
    let e = p.field_energy();
    let kmax = kmax.max(1);
    for k in 1..=kmax {
        if p.restoring(mode(k)) <= e {
            return Some(k);
        }
    }
    if e == 0.0 {
        return None;
    }
    let mut k = kmax;
    loop {
        let kf = k as f64;
        if p.sigma * kf * kf.tanh() > e {
            return None;
        }
        k += 1;
        if p.restoring(mode(k)) <= e {
            return Some(k);
        }
        if k >= TAIL_CAP {
            // gT_k decays like g/k; with σ = 0 the tail eventually fails
            return Some(k);
        }
    }
}

/// σγ²(l²−k²)T_kT_l(T_k−T_l) and ((g+σk²)T_k−(g+σl²)T_l)², the two sides of the resonance condition.
fn resonance_sides(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> (f64, f64) {
    // both sides are symmetric in (k, l); a fixed order makes them so in floating point too
    let (k, l) = (k.min(l), k.max(l));
    let (kf, lf) = (k.as_f64(), l.as_f64());
    let (t_k, t_l) = (tk(k), tk(l));
    let left = p.sigma * p.gamma * p.gamma * (lf * lf - kf * kf) * t_k * t_l * (t_k - t_l);
    let diff = p.restoring(k) - p.restoring(l);
    (left, diff * diff)
}

/// Whether modes k and l can share a bifurcation speed for some E₀.
pub fn resonance_condition_holds(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> bool {
    if k == l {
        return false;
    }
    let (left, right) = resonance_sides(k, l, p);
    left > right
}

/// Resonance field E_{k,l}: the value of E₀² at which λ*_{k,±} = λ*_{l,±}.
pub fn resonance_field(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> Result<Option<f64>> {
    if k == l {
        return Err(WaveError::SameMode(k.get()));
    }
    if p.gamma == 0.0 {
        return Err(WaveError::VorticityRequired);
    }
    let (left, right) = resonance_sides(k, l, p);
    if left <= right {
        return Ok(None);
    }
    let dt = tk(k.min(l)) - tk(k.max(l));
    Ok(Some((left - right) / (dt * dt * p.gamma * p.gamma * p.eps0)))
}

/// Flat-state mass flux and Bernoulli constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrivialState {
    pub lambda: f64,
    pub m: f64,
    pub q: f64,
}

pub fn trivial_constants(lambda: f64, p: &WaveParams) -> TrivialState {
    TrivialState { lambda, m: p.gamma / 2.0 - lambda, q: lambda * lambda - p.field_energy() }
}
