//! Newton correction, pseudo-arclength continuation of primary branches, singularity detection
//! along them, and switching onto secondary branches.
//!
//! Unknowns are z = (η_1..η_K, q0, λ); equations are the cosine modes 0..K of F plus one bordering
//! row, either a fixed mode coefficient or the arclength condition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bifurcation::{branch_direction_reduced, BifurcationPoint};
use crate::error::{Result, WaveError};
use crate::params::{ModeIndex, WaveParams};
use crate::residual::{Discretization, ExtendedState, Linearization};
use crate::stability::{state_eigen, TrackedEigen};
use crate::strip::SurfaceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    /// Sup-norm residual tolerance of every accepted point.
    pub tol: f64,
    pub max_newton: usize,
    pub initial_step: f64,
    pub max_step: f64,
    pub max_halvings: usize,
    /// Consecutive easy steps before the step doubles.
    pub easy_steps: usize,
    /// A step is easy when Newton needs at most this many iterations.
    pub easy_iterations: usize,
    /// Continuation stops at |s| = smax.
    pub smax: f64,
    /// +1 continues toward positive s, −1 toward negative s.
    pub direction: f64,
    pub max_points: usize,
    /// Smallest singular value below this fraction of the median triggers an event.
    pub singular_ratio: f64,
    /// Bisection width at which an event bracket is accepted.
    pub event_tol: f64,
    pub detect_events: bool,
    /// Least l-mode amplitude of a secondary point.
    pub mode_threshold: f64,
    /// Points requested from a branch switch.
    pub switch_points: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 15,
            initial_step: 1e-3,
            max_step: 4e-3,
            max_halvings: 8,
            easy_steps: 3,
            easy_iterations: 3,
            smax: 1e-2,
            direction: 1.0,
            max_points: 10_000,
            singular_ratio: 1e-5,
            event_tol: 1e-10,
            detect_events: true,
            mode_threshold: 1e-4,
            switch_points: 6,
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Err(WaveError::InvalidParameter { field, reason: reason.into() });
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol", "must be positive");
        }
        if !(self.initial_step > 0.0 && self.max_step >= self.initial_step) {
            return bad("max_step", "steps must satisfy 0 < initial_step <= max_step");
        }
        if !(self.smax >= 0.0 && self.smax.is_finite()) {
            return bad("smax", "must be finite and nonnegative");
        }
        if self.direction.abs() != 1.0 {
            return bad("direction", "must be +1 or -1");
        }
        if self.max_newton == 0 || self.max_points == 0 {
            return bad("max_newton", "iteration and point limits must be positive");
        }
        Ok(())
    }

    /// Switch perturbation ε = 10·tol^(1/2).
    pub fn switch_epsilon(&self) -> f64 {
        10.0 * self.tol.sqrt()
    }
}

/// Discretization plus physical parameters: everything a solve needs.
#[derive(Debug, Clone)]
pub struct WaveProblem {
    pub params: WaveParams,
    pub disc: Discretization,
}

impl WaveProblem {
    pub fn new(params: WaveParams, m: usize, n: usize) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, disc: Discretization::new(m, n)? })
    }

    pub fn modes(&self) -> usize {
        self.disc.modes()
    }
}

/// The bordering row closing the Newton system.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// Coefficient of cos(mode·q) held at `value`.
    Mode { mode: usize, value: f64 },
    /// tangent·(z − anchor) = step.
    Arclength { anchor: DVector<f64>, tangent: DVector<f64>, step: f64 },
    /// λ held at its initial value.
    Speed,
}

impl Constraint {
    fn row(&self, size: usize) -> DVector<f64> {
        match self {
            Constraint::Mode { mode, .. } => {
                let mut r = DVector::zeros(size);
                r[mode - 1] = 1.0;
                r
            }
            Constraint::Arclength { tangent, .. } => tangent.clone(),
            Constraint::Speed => {
                let mut r = DVector::zeros(size);
                r[size - 1] = 1.0;
                r
            }
        }
    }

    fn defect(&self, z: &DVector<f64>, z0: &DVector<f64>) -> f64 {
        match self {
            Constraint::Mode { mode, value } => z[mode - 1] - value,
            Constraint::Arclength { anchor, tangent, step } => tangent.dot(&(z - anchor)) - step,
            Constraint::Speed => z[z.len() - 1] - z0[z0.len() - 1],
        }
    }
}

/// Packs a state into z, padded to the retained modes.
pub fn pack(state: &ExtendedState, modes: usize) -> DVector<f64> {
    let eta = state.eta.padded(modes);
    let mut z = DVector::zeros(modes + 2);
    for (i, c) in eta.coeffs().iter().take(modes).enumerate() {
        z[i] = *c;
    }
    z[modes] = state.q0;
    z[modes + 1] = state.lambda;
    z
}

pub fn unpack(z: &DVector<f64>) -> ExtendedState {
    let modes = z.len() - 2;
    ExtendedState { eta: SurfaceProfile::new(z.rows(0, modes).iter().copied().collect()), lambda: z[modes + 1], q0: z[modes] }
}

/// A converged solve together with the Jacobian at the solution.
#[derive(Debug, Clone)]
pub struct Solved {
    pub state: ExtendedState,
    /// Rows: modes 0..K of F. Columns: η_1..η_K, q0, λ.
    pub jacobian: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

impl Solved {
    /// The Jacobian bordered by the given row.
    pub fn bordered(&self, row: &DVector<f64>) -> DMatrix<f64> {
        let (r, c) = self.jacobian.shape();
        let mut a = DMatrix::zeros(r + 1, c);
        a.view_mut((0, 0), (r, c)).copy_from(&self.jacobian);
        a.row_mut(r).copy_from(&row.transpose());
        a
    }
}

fn full_jacobian(lin: &Linearization<'_>, disc: &Discretization) -> Result<DMatrix<f64>> {
    let k = disc.modes();
    let j = lin.eta_jacobian()?.matrix;
    let dl = disc.transform.coeffs(&lin.lambda_derivative()?);
    let mut a = DMatrix::zeros(k + 1, k + 2);
    a.view_mut((0, 0), (k + 1, k + 1)).copy_from(&j);
    for r in 0..=k {
        a[(r, k + 1)] = dl[r];
    }
    Ok(a)
}

/// Newton's method on the bordered system from `guess`.
pub fn newton(guess: &ExtendedState, constraint: &Constraint, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<Solved> {
    newton_with(guess, constraint, prob, opts, false)
}

/// Sup norm of the retained modes of F, the merit function of the damped iteration.
fn merit(z: &DVector<f64>, prob: &WaveProblem) -> f64 {
    match Linearization::new(&unpack(z), &prob.params, &prob.disc) {
        Ok(lin) => lin.residual().coeffs[..=prob.modes()].iter().fold(0.0f64, |m, c| m.max(c.abs())),
        Err(_) => f64::INFINITY,
    }
}

fn newton_with(guess: &ExtendedState, constraint: &Constraint, prob: &WaveProblem, opts: &ContinuationOptions, damped: bool) -> Result<Solved> {
    let (p, disc) = (&prob.params, &prob.disc);
    let modes = disc.modes();
    let z0 = pack(guess, modes);
    let mut z = z0.clone();
    let mut first = None;
    let mut last = f64::INFINITY;
    let max_it = if damped { 4 * opts.max_newton } else { opts.max_newton };
    for it in 0..=max_it {
        let state = unpack(&z);
        let lin = Linearization::new(&state, p, disc)?;
        let res = lin.residual();
        let norm = res.sup_norm();
        let defect = constraint.defect(&z, &z0);
        let jac = full_jacobian(&lin, disc)?;
        if norm <= opts.tol && defect.abs() <= opts.tol {
            return Ok(Solved { state, jacobian: jac, residual_norm: norm, iterations: it });
        }
        let start = *first.get_or_insert(norm.max(opts.tol));
        last = norm;
        if it == max_it || !norm.is_finite() || (!damped && it >= 3 && norm > 1e3 * start) {
            break;
        }
        let mut a = DMatrix::zeros(modes + 2, modes + 2);
        a.view_mut((0, 0), (modes + 1, modes + 2)).copy_from(&jac);
        a.row_mut(modes + 1).copy_from(&constraint.row(modes + 2).transpose());
        let mut rhs = DVector::zeros(modes + 2);
        for r in 0..=modes {
            rhs[r] = -res.coeffs[r];
        }
        rhs[modes + 1] = -defect;
        let dz = a.lu().solve(&rhs).ok_or_else(|| WaveError::SingularSystem("bordered Newton matrix".into()))?;
        if damped {
            // backtracking on the retained-mode residual
            let m0 = res.coeffs[..=modes].iter().fold(0.0f64, |m, c| m.max(c.abs()));
            let mut t = 1.0;
            while t > 1e-3 && merit(&(&z + &dz * t), prob) > (1.0 - 1e-4 * t) * m0 {
                t *= 0.5;
            }
            z += dz * t;
        } else {
            z += dz;
        }
    }
    Err(WaveError::NewtonFailure { iterations: max_it, residual: last })
}

/// Sign of the determinant and singular values of a bordered Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub det_sign: f64,
    pub sigma_min: f64,
    pub sigma_median: f64,
}

impl TestFunction {
    pub fn of(a: &DMatrix<f64>) -> Self {
        let det = a.clone().lu().determinant();
        let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        Self { det_sign: det.signum(), sigma_min: sv[0], sigma_median: sv[sv.len() / 2] }
    }

    pub fn ratio(&self) -> f64 {
        self.sigma_min / self.sigma_median
    }
}

/// A converged point on a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Coefficient of the parameterizing mode.
    pub s: f64,
    pub state: ExtendedState,
    pub residual_norm: f64,
    /// μ(s); NaN when tracking was lost.
    pub tracked_eigenvalue: f64,
    /// Overlap of the tracked eigenvector with the previous point's.
    pub eigen_continuity: f64,
    pub test: TestFunction,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Primary,
    Secondary,
}

/// A detected singularity of the bordered Jacobian along a branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityEvent {
    /// Bracket in s.
    pub s_lo: f64,
    pub s_hi: f64,
    pub test_lo: TestFunction,
    pub test_hi: TestFunction,
    /// Whether the determinant changes sign across the bracket (otherwise a dip).
    pub sign_change: bool,
    /// Best point found inside the bracket.
    pub point: BranchPoint,
    /// Right singular vector of the smallest singular value, in z coordinates.
    pub null_vector: Vec<f64>,
    pub dominant_mode: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub origin: BifurcationPoint,
    pub params: WaveParams,
    pub kind: BranchKind,
    /// Mode whose coefficient is the amplitude coordinate s.
    pub mode: usize,
    pub points: Vec<BranchPoint>,
    pub events: Vec<SingularityEvent>,
    /// Why continuation stopped early, if it did.
    pub termination: Option<WaveError>,
}

impl Branch {
    /// The branch itself, or the error that cut it short.
    pub fn check(&self) -> Result<&Self> {
        match &self.termination {
            Some(e) => Err(e.clone()),
            None => Ok(self),
        }
    }

    pub fn reached(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }
}

fn border_row(mode: usize, size: usize) -> DVector<f64> {
    Constraint::Mode { mode, value: 0.0 }.row(size)
}

/// Wraps a solve into a branch point, tracking the mode-`track` eigenvalue.
fn make_point(solved: Solved, mode: usize, track: ModeIndex, prev: Option<&DVector<f64>>, prob: &WaveProblem) -> (BranchPoint, Option<DVector<f64>>) {
    let size = prob.modes() + 2;
    let test = TestFunction::of(&solved.bordered(&border_row(mode, size)));
    let eig: Option<TrackedEigen> = if solved.state.eta.coeffs().iter().all(|c| *c == 0.0) {
        state_eigen(&solved.state, track, &prob.params, &prob.disc).ok()
    } else {
        let block = solved.jacobian.view((1, 0), (prob.modes(), prob.modes())).into_owned();
        crate::stability::track_mode(&block, track.get()).ok()
    };
    let (mu, cont, vec) = match eig {
        Some(e) => {
            let c = prev.map_or(1.0, |v| v.dot(&e.vector).abs());
            (e.value, c, Some(e.vector))
        }
        None => (f64::NAN, 0.0, None),
    };
    let point = BranchPoint {
        s: solved.state.eta.coeff(mode),
        residual_norm: solved.residual_norm,
        state: solved.state,
        tracked_eigenvalue: mu,
        eigen_continuity: cont,
        test,
        newton_iterations: solved.iterations,
    };
    (point, vec)
}

/// Flat state at λ* as an exact solution.
fn origin_point(bp: &BifurcationPoint, prob: &WaveProblem) -> Result<(BranchPoint, Option<DVector<f64>>)> {
    let state = bp.trivial_state(prob.modes());
    let lin = Linearization::new(&state, &prob.params, &prob.disc)?;
    let solved = Solved { residual_norm: lin.residual().sup_norm(), jacobian: full_jacobian(&lin, &prob.disc)?, state, iterations: 0 };
    Ok(make_point(solved, bp.k.get(), bp.k, None, prob))
}

/// Predictor for amplitude s: s·cos(kq) with λ from the reduced curvature when available.
fn amplitude_guess(bp: &BifurcationPoint, s: f64, prob: &WaveProblem) -> ExtendedState {
    let curv = branch_direction_reduced(bp, &prob.params).map_or(0.0, |d| d.lambda_double_prime);
    let mut st = bp.trivial_state(prob.modes());
    st.eta.coeffs_mut()[bp.k.get() - 1] = s;
    st.lambda += 0.5 * curv * s * s;
    st
}

/// Solution of the mode-k branch with kernel coefficient fixed at s.
pub fn point_at_amplitude(bp: &BifurcationPoint, s: f64, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<BranchPoint> {
    if !bp.is_simple() {
        return Err(WaveError::TwoDimensionalKernel { k: bp.k.get(), partner: bp.partner_mode.map_or(0, |m| m.get()) });
    }
    if s == 0.0 {
        return Ok(origin_point(bp, prob)?.0);
    }
    let solved = newton(&amplitude_guess(bp, s, prob), &Constraint::Mode { mode: bp.k.get(), value: s }, prob, opts)?;
    Ok(make_point(solved, bp.k.get(), bp.k, None, prob).0)
}

/// Pseudo-arclength continuation of the primary branch from its bifurcation point.
///
/// Stops at |s| = smax or at the first unrecoverable step; in the latter case the points reached
/// so far are kept and the cause is stored in `termination`.
pub fn continue_branch(bp: &BifurcationPoint, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    if !bp.is_simple() {
        return Err(WaveError::TwoDimensionalKernel { k: bp.k.get(), partner: bp.partner_mode.map_or(0, |m| m.get()) });
    }
    let k = bp.k.get();
    let modes = prob.modes();
    if k > modes {
        return Err(WaveError::UnresolvedProfile { mode: k, capacity: modes });
    }
    let (p0, v0) = origin_point(bp, prob)?;
    let mut branch = Branch {
        origin: *bp,
        params: prob.params,
        kind: BranchKind::Primary,
        mode: k,
        points: vec![p0],
        events: vec![],
        termination: None,
    };
    march(&mut branch, v0, prob, opts);
    if opts.detect_events {
        branch.events = detect_singularities(&branch, prob, opts);
    }
    Ok(branch)
}

/// Continues a stored primary branch from its last point out to |s| = smax, keeping every
/// existing point. Events are re-detected over the whole branch.
pub fn extend_branch(mut branch: Branch, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    if branch.kind != BranchKind::Primary {
        return Err(WaveError::InvalidParameter { field: "branch", reason: "only primary branches can be extended".into() });
    }
    let Some(last) = branch.points.last() else {
        return continue_branch(&branch.origin, prob, opts);
    };
    if last.s != 0.0 && last.s.signum() != opts.direction {
        return Err(WaveError::InvalidParameter { field: "direction", reason: "stored branch runs the other way".into() });
    }
    let prev = if last.s == 0.0 {
        None
    } else {
        state_eigen(&last.state, branch.origin.k, &prob.params, &prob.disc).ok().map(|e| e.vector)
    };
    branch.termination = None;
    march(&mut branch, prev, prob, opts);
    if opts.detect_events {
        branch.events = detect_singularities(&branch, prob, opts);
    }
    Ok(branch)
}

/// Appends points to `branch` until |s| = smax or a step cannot be recovered.
fn march(branch: &mut Branch, mut prev_vec: Option<DVector<f64>>, prob: &WaveProblem, opts: &ContinuationOptions) {
    let bp = branch.origin;
    let k = branch.mode;
    let modes = prob.modes();
    let dir = opts.direction;
    let mut ds = opts.initial_step.min(opts.smax);
    let mut easy = 0;
    let mut halvings = 0;
    while opts.smax > 0.0 && branch.points.len() < opts.max_points {
        let last = branch.points.last().expect("nonempty");
        let remaining = opts.smax - last.s.abs();
        if remaining <= 1e-15 * opts.smax {
            break;
        }
        let n = branch.points.len();
        // the final step lands exactly on |s| = smax
        let (guess, constraint) = if n == 1 || remaining <= ds {
            let target = if n == 1 { dir * ds.min(opts.smax) } else { dir * opts.smax };
            let g = if n == 1 {
                amplitude_guess(&bp, target, prob)
            } else {
                let (a, b) = (pack(&branch.points[n - 2].state, modes), pack(&last.state, modes));
                let t = (target - last.s) / (last.s - branch.points[n - 2].s);
                unpack(&(&b + (&b - &a) * t))
            };
            (g, Constraint::Mode { mode: k, value: target })
        } else {
            let (a, b) = (pack(&branch.points[n - 2].state, modes), pack(&last.state, modes));
            let tangent = (&b - &a).normalize();
            (unpack(&(&b + &tangent * ds)), Constraint::Arclength { anchor: b, tangent, step: ds })
        };
        match newton(&guess, &constraint, prob, opts) {
            Ok(solved) => {
                let iters = solved.iterations;
                let (pt, v) = make_point(solved, k, bp.k, prev_vec.as_ref(), prob);
                if v.is_some() {
                    prev_vec = v;
                }
                branch.points.push(pt);
                halvings = 0;
                if iters <= opts.easy_iterations {
                    easy += 1;
                    if easy >= opts.easy_steps {
                        ds = (2.0 * ds).min(opts.max_step);
                        easy = 0;
                    }
                } else {
                    easy = 0;
                }
            }
            Err(e @ WaveError::DomainBreach { .. }) => {
                branch.termination = Some(e);
                break;
            }
            Err(e) => {
                halvings += 1;
                easy = 0;
                if halvings > opts.max_halvings {
                    branch.termination = Some(WaveError::StepFailure { s: last.s, reason: e.to_string() });
                    break;
                }
                ds *= 0.5;
            }
        }
    }
}

/// Least-squares polynomial λ(s) − λ* = Σ c_j s^j, j = 1..degree, through the bifurcation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureFit {
    pub lambda_prime: f64,
    pub lambda_double_prime: f64,
    pub degree: usize,
    pub points: usize,
    /// RMS of the fit residual in λ.
    pub rms: f64,
}

/// Fitted λ′(0) and λ″(0) from branch points; None with fewer than three nonzero-amplitude points.
pub fn fit_curvature(points: &[BranchPoint], lambda_star: f64) -> Option<CurvatureFit> {
    let pts: Vec<&BranchPoint> = points.iter().filter(|p| p.s != 0.0 && p.state.lambda.is_finite()).collect();
    if pts.len() < 3 {
        return None;
    }
    let degree = (pts.len() - 1).min(4);
    let scale = pts.iter().fold(0.0f64, |m, p| m.max(p.s.abs()));
    let a = DMatrix::from_fn(pts.len(), degree, |i, j| (pts[i].s / scale).powi(j as i32 + 1));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.state.lambda - lambda_star));
    let c = a.clone().svd(true, true).solve(&b, 1e-14).ok()?;
    let rms = ((&a * &c - &b).norm_squared() / pts.len() as f64).sqrt();
    Some(CurvatureFit {
        lambda_prime: c[0] / scale,
        lambda_double_prime: 2.0 * c[1] / (scale * scale),
        degree,
        points: pts.len(),
        rms,
    })
}

/// Brackets along the branch where the bordered Jacobian becomes singular.
///
/// Every bordering of the Jacobian is singular at the bifurcation point itself, so the segment
/// leaving it is bracketed from a probe solve at one hundredth of the first step instead.
pub fn detect_singularities(branch: &Branch, prob: &WaveProblem, opts: &ContinuationOptions) -> Vec<SingularityEvent> {
    let mut pts: Vec<BranchPoint> = branch.points.iter().filter(|p| p.s != 0.0).cloned().collect();
    if let Some(first) = pts.first() {
        let probe = first.s * 1e-2;
        let mut guess = unpack(&(pack(&first.state, prob.modes()) * 1e-2));
        guess.lambda = first.state.lambda;
        if let Ok(solved) = newton(&guess, &Constraint::Mode { mode: branch.mode, value: probe }, prob, opts) {
            pts.insert(0, make_point(solved, branch.mode, branch.origin.k, None, prob).0);
        }
    }
    let mut out = Vec::new();
    let threshold = opts.singular_ratio;
    for i in 1..pts.len() {
        let (a, b) = (&pts[i - 1], &pts[i]);
        let sign_change = a.test.det_sign * b.test.det_sign < 0.0;
        let dip = b.test.ratio() < threshold
            && b.test.ratio() <= a.test.ratio()
            && pts.get(i + 1).is_none_or(|c| b.test.ratio() <= c.test.ratio());
        if sign_change {
            if let Some(ev) = refine(branch, a, b, prob, opts) {
                out.push(ev);
            }
        } else if dip {
            let hi = pts.get(i + 1).unwrap_or(b);
            out.push(event_at(a, hi, b.clone(), false, branch, prob, opts));
        }
    }
    out
}

fn event_at(lo: &BranchPoint, hi: &BranchPoint, point: BranchPoint, sign_change: bool, branch: &Branch, prob: &WaveProblem, opts: &ContinuationOptions) -> SingularityEvent {
    let (null_vector, dominant_mode) = null_direction(&point, branch.mode, prob);
    SingularityEvent {
        s_lo: lo.s,
        s_hi: hi.s,
        test_lo: lo.test,
        test_hi: hi.test,
        sign_change,
        point,
        null_vector,
        dominant_mode,
        threshold: opts.singular_ratio,
    }
}

fn null_direction(point: &BranchPoint, mode: usize, prob: &WaveProblem) -> (Vec<f64>, usize) {
    let modes = prob.modes();
    let Ok(lin) = Linearization::new(&point.state, &prob.params, &prob.disc) else { return (vec![], 0) };
    let Ok(jac) = full_jacobian(&lin, &prob.disc) else { return (vec![], 0) };
    let mut a = DMatrix::zeros(modes + 2, modes + 2);
    a.view_mut((0, 0), (modes + 1, modes + 2)).copy_from(&jac);
    a.row_mut(modes + 1).copy_from(&border_row(mode, modes + 2).transpose());
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let imin = svd.singular_values.imin();
    let v: Vec<f64> = v_t.row(imin).iter().copied().collect();
    let dominant = (0..modes).max_by(|x, y| v[*x].abs().total_cmp(&v[*y].abs())).map_or(0, |i| i + 1);
    (v, dominant)
}

/// Bisection in s on the determinant sign.
fn refine(branch: &Branch, a: &BranchPoint, b: &BranchPoint, prob: &WaveProblem, opts: &ContinuationOptions) -> Option<SingularityEvent> {
    let modes = prob.modes();
    let mode = branch.mode;
    let (mut lo, mut hi) = (a.clone(), b.clone());
    while (hi.s - lo.s).abs() > opts.event_tol {
        let mid = 0.5 * (lo.s + hi.s);
        if mid == lo.s || mid == hi.s {
            break;
        }
        let (za, zb) = (pack(&lo.state, modes), pack(&hi.state, modes));
        let t = (mid - lo.s) / (hi.s - lo.s);
        let guess = unpack(&(&za + (&zb - &za) * t));
        let Ok(solved) = newton(&guess, &Constraint::Mode { mode, value: mid }, prob, opts) else { break };
        let (pt, _) = make_point(solved, mode, branch.origin.k, None, prob);
        if pt.test.det_sign * lo.test.det_sign < 0.0 {
            hi = pt;
        } else {
            lo = pt;
        }
    }
    let best = if lo.test.sigma_min <= hi.test.sigma_min { lo.clone() } else { hi.clone() };
    Some(event_at(&lo, &hi, best, true, branch, prob, opts))
}

/// Newton onto the secondary branch through an event, parameterized by the coefficient of the
/// event's dominant mode l. Points are taken at l-coefficient ε·j, j = 1..switch_points, with ε
/// climbing the ladder ε·{1, 3, 10} until the first point converges off the primary branch.
pub fn switch_branch(event: &SingularityEvent, primary: &Branch, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    let l = event.dominant_mode;
    let modes = prob.modes();
    if l == 0 || event.null_vector.len() != modes + 2 {
        return Err(WaveError::SwitchFailed("event carries no null vector".into()));
    }
    let v = DVector::from_column_slice(&event.null_vector);
    let v = &v / v[l - 1];
    let z_event = pack(&event.point.state, modes);
    let k = primary.mode;
    let mut last_err = String::from("no attempt");
    for factor in [1.0, 3.0, 10.0] {
        let eps = opts.switch_epsilon() * factor;
        let mut pts: Vec<BranchPoint> = Vec::new();
        let mut zs: Vec<DVector<f64>> = vec![z_event.clone()];
        let mut prev_vec: Option<DVector<f64>> = None;
        for j in 1..=opts.switch_points {
            // the primary branch carries no l content, so targets are absolute
            let target = eps * j as f64;
            let guess = if zs.len() == 1 {
                &z_event + &v * (target - event.point.state.eta.coeff(l))
            } else {
                let n = zs.len();
                &zs[n - 1] * 2.0 - &zs[n - 2]
            };
            match newton(&unpack(&guess), &Constraint::Mode { mode: l, value: target }, prob, opts) {
                Ok(solved) => {
                    let lc = solved.state.eta.coeff(l).abs();
                    let kc = solved.state.eta.coeff(k).abs();
                    if lc < opts.mode_threshold || kc < opts.mode_threshold {
                        last_err = format!("converged onto a single-mode state (|a_{l}| = {lc:e}, |a_{k}| = {kc:e})");
                        break;
                    }
                    zs.push(pack(&solved.state, modes));
                    let (pt, vec) = make_point(solved, l, primary.origin.k, prev_vec.as_ref(), prob);
                    prev_vec = vec.or(prev_vec);
                    pts.push(pt);
                }
                Err(e) => {
                    last_err = e.to_string();
                    break;
                }
            }
        }
        if !pts.is_empty() {
            return Ok(Branch {
                origin: primary.origin,
                params: primary.params,
                kind: BranchKind::Secondary,
                mode: l,
                termination: (pts.len() < opts.switch_points)
                    .then(|| WaveError::StepFailure { s: pts.last().map_or(0.0, |p| p.s), reason: last_err.clone() }),
                points: pts,
                events: vec![],
            });
        }
    }
    Err(WaveError::SwitchFailed(last_err))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Minimal period 2π/g, g the gcd of the modes whose coefficient exceeds `threshold`·max.
pub fn minimal_period(eta: &SurfaceProfile, threshold: f64) -> f64 {
    let top = eta.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let g = eta
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| top > 0.0 && c.abs() > threshold * top)
        .fold(0, |g, (i, _)| gcd(g, i + 1));
    if g == 0 {
        0.0
    } else {
        2.0 * std::f64::consts::PI / g as f64
    }
}

/// Damped Newton with the speed frozen, used by uniqueness probes.
pub fn newton_fixed_speed(guess: &ExtendedState, prob: &WaveProblem, opts: &ContinuationOptions) -> Result<Solved> {
    newton_with(guess, &Constraint::Speed, prob, opts, true)
}
