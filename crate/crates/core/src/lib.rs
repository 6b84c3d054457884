//! Traveling electrohydrodynamic capillary-gravity waves with constant vorticity: a flattened
//! two-strip collocation solver, bifurcation analysis from the flat state, branch continuation,
//! formal stability, and secondary branches near mode resonances.

pub mod bifurcation;
pub mod continuation;
pub mod error;
pub mod expansion;
pub mod green;
pub mod params;
pub mod residual;
pub mod spectral;
pub mod stability;
pub mod strip;

pub use bifurcation::{
    branch_direction, branch_direction_reduced, find_bifurcation_points, kernel_check, nondegeneracy_checks, resonance_record, shared_speed,
    BifurcationPoint, BranchDirection, KernelCheck, ResonanceRecord,
};
pub use continuation::{
    continue_branch, detect_singularities, extend_branch, fit_curvature, minimal_period, newton_fixed_speed, point_at_amplitude, switch_branch, Branch,
    BranchKind, BranchPoint, ContinuationOptions, CurvatureFit, SingularityEvent, WaveProblem,
};
pub use error::{Result, WaveError};
pub use params::{
    admissible_field, bifurcation_speeds, dispersion, mode, resonance_condition_holds, resonance_field, tk, BranchSign,
    ModeIndex, SpeedPair, WaveParams,
};
pub use residual::{assemble_residual, eta_jacobian, Discretization, ExtendedState, ResidualVector};
pub use stability::{
    branch_eigenvalue, classify_branch, classify_trivial, crossing_slope, trivial_spectrum, SpectrumReport, Stability, StabilityLabel,
};
pub use strip::{StripGrid, StripSide, SurfaceProfile};
