use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("wave number must be >= 1, got {0}")]
    InvalidMode(i64),

    #[error("degenerate double root for mode {k}: discriminant {discriminant:e} is zero within tolerance")]
    DegenerateRoot { k: usize, discriminant: f64 },

    #[error("vorticity required: resonance field divides by gamma^2")]
    VorticityRequired,

    #[error("resonance needs two distinct modes, got k = l = {0}")]
    SameMode(usize),

    #[error("inadmissible field: (g + sigma k^2) T_k <= eps0 E0^2 at k = {k}")]
    InadmissibleField { k: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unresolved profile: mode {mode} exceeds grid capacity {capacity}")]
    UnresolvedProfile { mode: usize, capacity: usize },

    #[error("singular collocation system ({0})")]
    SingularSystem(String),

    #[error("domain breach: sup|eta| = {sup} >= 1")]
    DomainBreach { sup: f64 },

    #[error("nonfinite residual")]
    NonfiniteResidual,

    #[error("transversality failure at mode {k}: d_lambda D_k vanishes")]
    TransversalityFailure { k: usize },

    #[error("two-dimensional kernel at mode {k} (partner {partner}); perturb E0 and use the secondary pipeline")]
    TwoDimensionalKernel { k: usize, partner: usize },

    #[error("step failure at s = {s}: {reason}")]
    StepFailure { s: f64, reason: String },

    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure { iterations: usize, residual: f64 },

    #[error("no resonance field for modes ({k}, {l}): the coincidence condition fails")]
    NoResonance { k: usize, l: usize },

    #[error("degenerate resonance: determinant {which} = {value:e} below threshold")]
    DegenerateResonance { which: u8, value: f64 },

    #[error("branch switch failed: {0}")]
    SwitchFailed(String),

    #[error("eigenvalue tracking lost: best overlap {overlap:.3} < 0.7")]
    TrackingLost { overlap: f64 },

    #[error("range [{lo}, {hi}] contains {count} bifurcation points")]
    MultipleBifurcationPoints { lo: f64, hi: f64, count: usize },
}

pub type Result<T> = std::result::Result<T, WaveError>;
