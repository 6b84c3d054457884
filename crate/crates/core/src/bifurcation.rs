//! Primary bifurcation points, branch directions at the flat state, and the resonance
//! nondegeneracy determinants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::expansion::{reduced_curvature, second_variation};
use crate::params::{
    bifurcation_speeds, dispersion, first_inadmissible_mode, mode, resonance_field, tk, BranchSign, ModeIndex,
    WaveParams,
};
use crate::residual::{
    d_e0_eta, d_lambda_eta, eta_jacobian, second_derivative_on, third_derivative_on, Discretization, ExtendedState,
};
use crate::spectral::CosineTransform;
use crate::strip::SurfaceProfile;

/// Relative distance below which two bifurcation speeds count as the same.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Singular values below this fraction of the kernel scale count toward the kernel.
pub const KERNEL_TOL: f64 = 1e-6;

/// A root λ*_{k,±} of the dispersion symbol together with its kernel bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub k: ModeIndex,
    pub sign: BranchSign,
    pub lambda_star: f64,
    pub kernel_dim: usize,
    pub partner_mode: Option<ModeIndex>,
}

impl BifurcationPoint {
    /// The point λ*_{k,sign} with partners searched among modes 1..=search.
    pub fn new(k: ModeIndex, sign: BranchSign, p: &WaveParams, search: usize) -> Result<Self> {
        let speeds = bifurcation_speeds(k, p)?.ok_or(WaveError::InadmissibleField { k: k.get() })?;
        let lambda_star = speeds.get(sign);
        let partners = coincident_modes(k, lambda_star, p, search.max(k.get()))?;
        Ok(Self { k, sign, lambda_star, kernel_dim: 1 + partners.len(), partner_mode: partners.first().copied() })
    }

    pub fn is_simple(&self) -> bool {
        self.kernel_dim == 1
    }

    /// Flat state at the bifurcation speed.
    pub fn trivial_state(&self, modes: usize) -> ExtendedState {
        ExtendedState::trivial(self.lambda_star, modes)
    }

    fn require_simple(&self) -> Result<()> {
        match (self.kernel_dim, self.partner_mode) {
            (1, _) => Ok(()),
            (_, partner) => Err(WaveError::TwoDimensionalKernel { k: self.k.get(), partner: partner.map_or(0, |m| m.get()) }),
        }
    }
}

/// Modes m ≠ k, m ≤ search, having a root within [`COINCIDENCE_TOL`] of `lambda`.
fn coincident_modes(k: ModeIndex, lambda: f64, p: &WaveParams, search: usize) -> Result<Vec<ModeIndex>> {
    let mut out = Vec::new();
    for m in (1..=search).filter(|&m| m != k.get()) {
        let speeds = match bifurcation_speeds(mode(m), p) {
            Ok(Some(s)) => s,
            Ok(None) | Err(WaveError::DegenerateRoot { .. }) => continue,
            Err(e) => return Err(e),
        };
        let tol = COINCIDENCE_TOL * lambda.abs().max(1.0);
        if (speeds.plus - lambda).abs() <= tol || (speeds.minus - lambda).abs() <= tol {
            out.push(mode(m));
        }
    }
    Ok(out)
}

/// Natural size of the η-block near λ*: |λ*·∂_λD_k| (at least 1).
pub fn kernel_scale(bp: &BifurcationPoint, p: &WaveParams) -> f64 {
    (bp.lambda_star * d_lambda_eta(bp.k, bp.lambda_star, p)).abs().max(1.0)
}

/// SVD of the discrete η-block Jacobian at the flat state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    /// Ascending.
    pub singular_values: Vec<f64>,
    pub scale: f64,
    /// Number of singular values below KERNEL_TOL·scale.
    pub count: usize,
    /// |coefficient of cos(kq)| in the unit right singular vector of the smallest singular value.
    pub overlap: f64,
    /// Dominant mode of each kernel vector.
    pub kernel_modes: Vec<usize>,
}

pub fn kernel_check(bp: &BifurcationPoint, p: &WaveParams, disc: &Discretization) -> Result<KernelCheck> {
    if bp.k.get() > disc.modes() {
        return Err(WaveError::UnresolvedProfile { mode: bp.k.get(), capacity: disc.modes() });
    }
    let jac = eta_jacobian(&bp.trivial_state(disc.modes()), p, disc)?;
    let svd = jac.eta_block().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let scale = kernel_scale(bp, p);
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let count = singular_values.iter().filter(|s| **s < KERNEL_TOL * scale).count();
    let dominant = |row: usize| {
        (0..v_t.ncols()).max_by(|a, b| v_t[(row, *a)].abs().total_cmp(&v_t[(row, *b)].abs())).map_or(0, |c| c + 1)
    };
    let kernel_modes = order.iter().take(count).map(|&r| dominant(r)).collect();
    let overlap = v_t[(order[0], bp.k.get() - 1)].abs();
    Ok(KernelCheck { singular_values, scale, count, overlap, kernel_modes })
}

/// All λ*_{k,±} for k ≤ kmax.
///
/// With a discretization, each point's kernel dimension is taken from the singular values of the
/// discrete Jacobian; otherwise from coincidences among the closed-form roots.
pub fn find_bifurcation_points(p: &WaveParams, kmax: usize, disc: Option<&Discretization>) -> Result<Vec<BifurcationPoint>> {
    if let Some(k) = first_inadmissible_mode(p, kmax) {
        return Err(WaveError::InadmissibleField { k });
    }
    let search = disc.map_or(kmax, |d| d.modes().max(kmax));
    let mut out = Vec::with_capacity(2 * kmax);
    for k in 1..=kmax {
        for sign in [BranchSign::Plus, BranchSign::Minus] {
            let mut bp = BifurcationPoint::new(mode(k), sign, p, search)?;
            if let Some(d) = disc.filter(|d| k <= d.modes()) {
                let check = kernel_check(&bp, p, d)?;
                if check.count >= 1 {
                    bp.kernel_dim = check.count;
                    if bp.partner_mode.is_none() {
                        bp.partner_mode = check.kernel_modes.iter().find(|&&m| m != k).map(|&m| mode(m));
                    }
                }
            }
            out.push(bp);
        }
    }
    Ok(out)
}

/// λ′(0) and λ″(0) of a primary branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchDirection {
    pub lambda_prime: f64,
    pub lambda_double_prime: f64,
}

fn transversal_slope(bp: &BifurcationPoint, p: &WaveParams) -> Result<f64> {
    bp.require_simple()?;
    let a = d_lambda_eta(bp.k, bp.lambda_star, p);
    if a.abs() <= 1e-12 * kernel_scale(bp, p) {
        return Err(WaveError::TransversalityFailure { k: bp.k.get() });
    }
    Ok(a)
}

/// Half grid resolving cubic products of cos(kq).
fn product_grid(k: usize) -> CosineTransform {
    CosineTransform::new(2 * (4 * k + 8))
}

/// Crandall–Rabinowitz quotients built from the closed-form flat-state derivatives
/// `second_derivative` and `third_derivative`.
pub fn branch_direction(bp: &BifurcationPoint, p: &WaveParams) -> Result<BranchDirection> {
    let a = transversal_slope(bp, p)?;
    let k = bp.k.get();
    let t = product_grid(k);
    let x = SurfaceProfile::single(k, 1.0, k);
    let quad = second_derivative_on(&x, &x, bp.lambda_star, p, &t).projection(k);
    let cubic = third_derivative_on(&x, bp.lambda_star, p, &t).projection(k);
    Ok(BranchDirection { lambda_prime: -quad / (2.0 * a), lambda_double_prime: -cubic / (3.0 * a) })
}

/// Same quotients from the full expansion, with the second-order shape correction in λ″.
pub fn branch_direction_reduced(bp: &BifurcationPoint, p: &WaveParams) -> Result<BranchDirection> {
    let a = transversal_slope(bp, p)?;
    let k = bp.k.get();
    let x = SurfaceProfile::single(k, 1.0, k);
    let quad = second_variation(&x, &x, bp.lambda_star, p).projection(k);
    Ok(BranchDirection {
        lambda_prime: -quad / (2.0 * a),
        lambda_double_prime: reduced_curvature(bp.k, bp.lambda_star, p),
    })
}

/// Relative size under which a nondegeneracy determinant counts as zero.
pub const DETERMINANT_TOL: f64 = 1e-10;

/// Nondegeneracy data at a two-mode resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub k: ModeIndex,
    pub l: ModeIndex,
    /// E_{k,l}, the resonant value of E₀².
    pub e_field: f64,
    /// The root pair that coincides.
    pub sign: BranchSign,
    pub lambda_star: f64,
    /// Speed–field determinant.
    pub determinant1: f64,
    /// 8γε₀E₀(T_l − T_k)/(T_kT_l).
    pub determinant1_closed: f64,
    /// Speed–curvature determinant from the closed-form second derivative.
    pub determinant2: f64,
    /// Same determinant from the full second variation.
    pub determinant2_full: f64,
    /// Distance between the other root pair of k and l.
    pub other_gap: f64,
    /// Entry sizes against which each determinant is judged.
    pub scale1: f64,
    pub scale2: f64,
}

impl ResonanceRecord {
    /// The first determinant that vanishes relative to its entries, if any.
    pub fn degeneracy(&self) -> Option<WaveError> {
        if self.determinant1.abs() <= DETERMINANT_TOL * self.scale1 {
            return Some(WaveError::DegenerateResonance { which: 1, value: self.determinant1 });
        }
        if self.determinant2.abs() <= DETERMINANT_TOL * self.scale2 {
            return Some(WaveError::DegenerateResonance { which: 2, value: self.determinant2 });
        }
        None
    }
}

/// Both determinants at E₀² = E_{k,l}, failing when either vanishes.
pub fn nondegeneracy_checks(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> Result<ResonanceRecord> {
    let rec = resonance_record(k, l, p)?;
    match rec.degeneracy() {
        Some(e) => Err(e),
        None => Ok(rec),
    }
}

/// Both determinants at E₀² = E_{k,l} without judging them. E₀ keeps the sign of `p.e0`
/// (positive when zero).
pub fn resonance_record(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> Result<ResonanceRecord> {
    let e_field = resonance_field(k, l, p)?.ok_or(WaveError::NoResonance { k: k.get(), l: l.get() })?;
    let e0 = e_field.sqrt() * if p.e0 < 0.0 { -1.0 } else { 1.0 };
    let pr = p.with_e0(e0);
    let no_roots = || WaveError::InadmissibleField { k: k.get() };
    let sk = bifurcation_speeds(k, &pr)?.ok_or_else(no_roots)?;
    let sl = bifurcation_speeds(l, &pr)?.ok_or_else(no_roots)?;
    let gap_plus = (sk.plus - sl.plus).abs();
    let gap_minus = (sk.minus - sl.minus).abs();
    let (sign, other_gap) = if gap_plus <= gap_minus { (BranchSign::Plus, gap_minus) } else { (BranchSign::Minus, gap_plus) };
    let lambda = sk.get(sign);

    let (ak, al) = (d_lambda_eta(k, lambda, &pr), d_lambda_eta(l, lambda, &pr));
    let (ek, el) = (d_e0_eta(k, &pr), d_e0_eta(l, &pr));
    let determinant1 = det2x2(ak, ek, al, el);
    let (tk_, tl_) = (tk(k), tk(l));
    let determinant1_closed = 8.0 * pr.gamma * pr.eps0 * e0 * (tl_ - tk_) / (tk_ * tl_);

    let top = k.get().max(l.get());
    let t = product_grid(top);
    let xk = SurfaceProfile::single(k.get(), 1.0, top);
    let xl = SurfaceProfile::single(l.get(), 1.0, top);
    let fk = second_derivative_on(&xk, &xk, lambda, &pr, &t);
    let fl = second_derivative_on(&xk, &xl, lambda, &pr, &t);
    let (bkk, bkl) = (fk.projection(k.get()), fl.projection(l.get()));
    let determinant2 = det2x2(ak, bkk, al, bkl);
    let fkk = second_variation(&xk, &xk, lambda, &pr).projection(k.get());
    let fkl = second_variation(&xk, &xl, lambda, &pr).projection(l.get());
    let determinant2_full = det2x2(ak, fkk, al, fkl);

    // compare against the size of the entries, not of the products, which can vanish together
    let speed = ak.abs() + al.abs();
    let scale1 = speed * (ek.abs() + el.abs()).max(f64::MIN_POSITIVE);
    let scale2 = speed * fk.sup_norm().max(fl.sup_norm());
    Ok(ResonanceRecord {
        k,
        l,
        e_field,
        sign,
        lambda_star: lambda,
        determinant1,
        determinant1_closed,
        determinant2,
        determinant2_full,
        other_gap,
        scale1,
        scale2,
    })
}

fn det2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    DMatrix::from_row_slice(2, 2, &[a, b, c, d]).determinant()
}

/// The speed shared by modes k and l at the given field, if their roots coincide.
pub fn shared_speed(k: ModeIndex, l: ModeIndex, p: &WaveParams) -> Result<Option<(BranchSign, f64)>> {
    let (Some(sk), Some(sl)) = (bifurcation_speeds(k, p)?, bifurcation_speeds(l, p)?) else {
        return Ok(None);
    };
    for sign in [BranchSign::Plus, BranchSign::Minus] {
        let (a, b) = (sk.get(sign), sl.get(sign));
        if (a - b).abs() <= COINCIDENCE_TOL * a.abs().max(1.0) {
            return Ok(Some((sign, a)));
        }
    }
    Ok(None)
}

/// |D_k(λ)| relative to its quadratic scale; zero on a root.
pub fn root_defect(bp: &BifurcationPoint, p: &WaveParams) -> f64 {
    dispersion(bp.k, bp.lambda_star, p).abs() * tk(bp.k) / 2.0 / crate::params::quadratic_scale(bp.k, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> WaveParams {
        WaveParams::new(1.0, 1.0, 0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn symmetric_pairs_without_vorticity() {
        let pts = find_bifurcation_points(&base(), 3, None).unwrap();
        assert_eq!(pts.len(), 6);
        for bp in &pts {
            let kf = bp.k.as_f64();
            let expect = ((1.0 + kf * kf) * tk(bp.k)).sqrt() * bp.sign.factor();
            assert!((bp.lambda_star - expect).abs() < 1e-14);
            assert_eq!(bp.kernel_dim, 1);
            assert!(root_defect(bp, &base()) < 1e-15);
        }
    }

    #[test]
    fn inadmissible_field_is_rejected() {
        let p = WaveParams::new(0.1, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(find_bifurcation_points(&p, 2, None), Err(WaveError::InadmissibleField { .. })));
    }

    #[test]
    fn closed_form_first_derivative_vanishes() {
        let p = WaveParams::new(1.0, 1.0, 0.3, 1.0, 0.4).unwrap();
        for bp in find_bifurcation_points(&p, 3, None).unwrap() {
            assert!(branch_direction(&bp, &p).unwrap().lambda_prime.abs() < 1e-10);
            assert!(branch_direction_reduced(&bp, &p).unwrap().lambda_prime.abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_curvature_matches_nine_term_form() {
        let p = WaveParams::new(1.0, 1.0, 0.2, 1.0, 0.3).unwrap();
        for bp in find_bifurcation_points(&p, 3, None).unwrap() {
            let d = branch_direction(&bp, &p).unwrap();
            let closed = crate::residual::cubic_projection_closed_form(bp.k, bp.lambda_star, &p)
                / (-3.0 * d_lambda_eta(bp.k, bp.lambda_star, &p));
            assert!((d.lambda_double_prime - closed).abs() < 1e-9 * closed.abs().max(1.0));
        }
    }

    #[test]
    fn resonance_record_at_two_one() {
        let p = WaveParams::new(1.0, 1.0, 2.0, 1.0, 0.0).unwrap();
        let r = nondegeneracy_checks(mode(2), mode(1), &p).unwrap();
        assert_eq!(r.sign, BranchSign::Plus);
        assert!((r.determinant1 - r.determinant1_closed).abs() < 1e-12 * r.determinant1_closed.abs());
        assert!(r.other_gap > 1e-3);
        let pr = p.with_e0(r.e_field.sqrt());
        let bp = BifurcationPoint::new(mode(2), BranchSign::Plus, &pr, 8).unwrap();
        assert_eq!(bp.kernel_dim, 2);
        assert_eq!(bp.partner_mode, Some(mode(1)));
        assert!(matches!(branch_direction(&bp, &pr), Err(WaveError::TwoDimensionalKernel { k: 2, partner: 1 })));
        // cos q·cos²(2q) has no mean, so the reversed pair is degenerate
        assert!(matches!(nondegeneracy_checks(mode(1), mode(2), &p), Err(WaveError::DegenerateResonance { which: 2, .. })));
    }

    #[test]
    fn discrete_kernel_is_one_dimensional_off_resonance() {
        let disc = Discretization::new(16, 14).unwrap();
        let p = WaveParams::new(1.0, 1.0, 0.3, 1.0, 0.4).unwrap();
        for bp in find_bifurcation_points(&p, 2, Some(&disc)).unwrap() {
            assert_eq!(bp.kernel_dim, 1);
            let check = kernel_check(&bp, &p, &disc).unwrap();
            assert!(check.overlap > 0.999);
            assert!(check.singular_values[1] > 1e-2 * check.scale);
        }
    }
}
