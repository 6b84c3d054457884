//! The interfacial Bernoulli residual F(λ, E₀, η), its exact discrete Jacobian, and the
//! closed-form flat-state derivatives.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::green::{stream_trace, voltage_trace};
use crate::params::{mode, tk, ModeIndex, WaveParams};
use crate::spectral::CosineTransform;
use crate::strip::{
    check_profile, stream_background, voltage_background, FieldDerivatives, ProfileNodes, StripGrid,
    StripOperator, StripSide, SurfaceProfile,
};

/// Paired strip grids plus the cosine transform of their shared q-nodes.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub lower: StripGrid,
    pub upper: StripGrid,
    pub transform: CosineTransform,
}

impl Discretization {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        Ok(Self {
            lower: StripGrid::new(m, n, StripSide::Lower)?,
            upper: StripGrid::new(m, n, StripSide::Upper)?,
            transform: CosineTransform::new(m),
        })
    }

    pub fn m(&self) -> usize {
        self.lower.m()
    }

    pub fn n(&self) -> usize {
        self.lower.n()
    }

    /// Number of retained η modes, 1..=M/2 − 1.
    pub fn modes(&self) -> usize {
        self.lower.max_mode()
    }

    pub fn q_nodes(&self) -> &[f64] {
        self.lower.q_nodes()
    }
}

/// η together with the speed and the Bernoulli correction, Q = λ² − ε₀E₀² + q0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedState {
    pub eta: SurfaceProfile,
    pub lambda: f64,
    pub q0: f64,
}

impl ExtendedState {
    pub fn trivial(lambda: f64, modes: usize) -> Self {
        Self { eta: SurfaceProfile::zero(modes), lambda, q0: 0.0 }
    }
}

/// F at the q-nodes plus its cosine coefficients (modes 0..=M/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector {
    pub values: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl ResidualVector {
    pub fn from_values(values: Vec<f64>, transform: &CosineTransform) -> Self {
        let coeffs = transform.coeffs(&values);
        Self { values, coeffs }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// ⟨l̃, F⟩ = (1/π)∫F cos(kq) dq.
    pub fn projection(&self, k: usize) -> f64 {
        self.coeffs[k]
    }
}

/// Pointwise Bernoulli residual and its partial derivatives in the traces and in (η, η′, η″).
#[derive(Debug, Clone, Default)]
struct Bernoulli {
    f: Vec<f64>,
    psi_q: Vec<f64>,
    psi_p: Vec<f64>,
    v_q: Vec<f64>,
    v_p: Vec<f64>,
    e: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn bernoulli(nodes: &ProfileNodes, pq: &[f64], pp: &[f64], vq: &[f64], vp: &[f64], p: &WaveParams, lambda: f64, q0: f64) -> Bernoulli {
    let n = nodes.e.len();
    let mut b = Bernoulli { f: vec![0.0; n], psi_q: vec![0.0; n], psi_p: vec![0.0; n], v_q: vec![0.0; n], v_p: vec![0.0; n], e: vec![0.0; n], e1: vec![0.0; n], e2: vec![0.0; n] };
    let q = lambda * lambda - p.field_energy() + q0;
    for i in 0..n {
        let (e, e1, e2) = (nodes.e[i], nodes.e1[i], nodes.e2[i]);
        let (lo, up) = (1.0 + e, 1.0 - e);
        let w = e1 * e1 + 1.0;
        let pres = pq[i] * pq[i] + w / (lo * lo) * pp[i] * pp[i] - 2.0 * e1 / lo * pq[i] * pp[i];
        let maxw = vq[i] * vq[i] + w / (up * up) * vp[i] * vp[i] - 2.0 * e1 / up * vq[i] * vp[i];
        let sq = w.sqrt();
        let curv = -2.0 * p.sigma * e2 / (w * sq);
        b.f[i] = pres + 2.0 * p.g * e + curv - p.eps0 * maxw - q;
        b.psi_q[i] = 2.0 * pq[i] - 2.0 * e1 / lo * pp[i];
        b.psi_p[i] = 2.0 * w / (lo * lo) * pp[i] - 2.0 * e1 / lo * pq[i];
        b.v_q[i] = -p.eps0 * (2.0 * vq[i] - 2.0 * e1 / up * vp[i]);
        b.v_p[i] = -p.eps0 * (2.0 * w / (up * up) * vp[i] - 2.0 * e1 / up * vq[i]);
        let pres_e = -2.0 * w / (lo * lo * lo) * pp[i] * pp[i] + 2.0 * e1 / (lo * lo) * pq[i] * pp[i];
        let pres_e1 = 2.0 * e1 / (lo * lo) * pp[i] * pp[i] - 2.0 / lo * pq[i] * pp[i];
        let maxw_e = 2.0 * w / (up * up * up) * vp[i] * vp[i] - 2.0 * e1 / (up * up) * vq[i] * vp[i];
        let maxw_e1 = 2.0 * e1 / (up * up) * vp[i] * vp[i] - 2.0 / up * vq[i] * vp[i];
        b.e[i] = pres_e + 2.0 * p.g - p.eps0 * maxw_e;
        b.e1[i] = pres_e1 + 6.0 * p.sigma * e2 * e1 / (w * w * sq) - p.eps0 * maxw_e1;
        b.e2[i] = -2.0 * p.sigma / (w * sq);
    }
    b
}

/// Residual at a state, with everything needed for exact derivatives kept alive.
pub struct Linearization<'d> {
    disc: &'d Discretization,
    params: WaveParams,
    state: ExtendedState,
    nodes: ProfileNodes,
    lower: StripOperator<'d>,
    upper: StripOperator<'d>,
    phi_d: FieldDerivatives,
    chi_d: FieldDerivatives,
    bern: Bernoulli,
    residual: ResidualVector,
}

impl<'d> Linearization<'d> {
    pub fn new(state: &ExtendedState, p: &WaveParams, disc: &'d Discretization) -> Result<Self> {
        check_profile(&state.eta, &disc.lower)?;
        let nodes = state.eta.evaluate(disc.q_nodes());
        let lower = StripOperator::assemble(&disc.lower, &nodes)?;
        let upper = StripOperator::assemble(&disc.upper, &nodes)?;
        let sb = stream_background(&nodes, state.lambda, p.gamma);
        let vb = voltage_background(&nodes, p.e0);
        let phi = lower.solve(sb.interface.clone())?;
        let chi = upper.solve(vb.interface.clone())?;
        let add = |a: &[f64], b: Vec<f64>| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<f64>>();
        let pq = add(&sb.tq, disc.lower.diff_q(&sb.interface));
        let pp = add(&sb.tp, disc.lower.normal_at_interface(&phi));
        let vq = add(&vb.tq, disc.upper.diff_q(&vb.interface));
        let vp = add(&vb.tp, disc.upper.normal_at_interface(&chi));
        let bern = bernoulli(&nodes, &pq, &pp, &vq, &vp, p, state.lambda, state.q0);
        if bern.f.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonfiniteResidual);
        }
        let residual = ResidualVector::from_values(bern.f.clone(), &disc.transform);
        let phi_d = lower.derivatives(&phi);
        let chi_d = upper.derivatives(&chi);
        Ok(Self { disc, params: *p, state: state.clone(), nodes, lower, upper, phi_d, chi_d, bern, residual })
    }

    pub fn residual(&self) -> &ResidualVector {
        &self.residual
    }

    pub fn state(&self) -> &ExtendedState {
        &self.state
    }

    /// Nodal directional derivatives of F along each η-direction (λ, E₀, q0 fixed).
    pub fn directional(&self, dirs: &[ProfileNodes]) -> Result<Vec<Vec<f64>>> {
        let nq = self.disc.lower.nq();
        let (lam, gam, e0) = (self.state.lambda, self.params.gamma, self.params.e0);
        let mut lb = Vec::with_capacity(dirs.len());
        let mut lf = Vec::with_capacity(dirs.len());
        let mut ub = Vec::with_capacity(dirs.len());
        let mut uf = Vec::with_capacity(dirs.len());
        for d in dirs {
            lb.push((0..nq).map(|i| -(gam * self.nodes.e[i] + lam) * d.e[i]).collect::<Vec<f64>>());
            lf.push(Some(shape_forcing(&self.lower, &self.phi_d, d)));
            ub.push((0..nq).map(|i| -e0 * d.e[i]).collect::<Vec<f64>>());
            uf.push(Some(shape_forcing(&self.upper, &self.chi_d, d)));
        }
        let dphi = self.lower.solve_batch(&lb, &lf)?;
        let dchi = self.upper.solve_batch(&ub, &uf)?;
        let mut out = Vec::with_capacity(dirs.len());
        for (idx, d) in dirs.iter().enumerate() {
            let pq_c = self.disc.lower.diff_q(&lb[idx]);
            let pp_c = self.disc.lower.normal_at_interface(&dphi[idx]);
            let vq_c = self.disc.upper.diff_q(&ub[idx]);
            let vp_c = self.disc.upper.normal_at_interface(&dchi[idx]);
            let b = &self.bern;
            let col = (0..nq)
                .map(|i| {
                    let (e, e1) = (self.nodes.e[i], self.nodes.e1[i]);
                    let dpq = gam * d.e[i] * e1 + (gam * e + lam) * d.e1[i] + pq_c[i];
                    let dpp = gam * d.e[i] * (1.0 + e) + (gam * e + lam) * d.e[i] + pp_c[i];
                    let dvq = e0 * d.e1[i] + vq_c[i];
                    let dvp = -e0 * d.e[i] + vp_c[i];
                    b.psi_q[i] * dpq + b.psi_p[i] * dpp + b.v_q[i] * dvq + b.v_p[i] * dvp + b.e[i] * d.e[i] + b.e1[i] * d.e1[i] + b.e2[i] * d.e2[i]
                })
                .collect();
            out.push(col);
        }
        Ok(out)
    }

    /// Cosine-mode Jacobian: columns η_1..η_K then q0; rows modes 0..K.
    pub fn eta_jacobian(&self) -> Result<EtaJacobian> {
        let k = self.disc.modes();
        let q = self.disc.q_nodes();
        let dirs: Vec<ProfileNodes> = (1..=k).map(|n| SurfaceProfile::single(n, 1.0, n).evaluate(q)).collect();
        let cols = self.directional(&dirs)?;
        let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
        for (c, col) in cols.iter().enumerate() {
            let co = self.disc.transform.coeffs(col);
            for r in 0..=k {
                m[(r, c)] = co[r];
            }
        }
        m[(0, k)] = -1.0;
        Ok(EtaJacobian { matrix: m })
    }

    /// ∂F/∂λ at the nodes.
    pub fn lambda_derivative(&self) -> Result<Vec<f64>> {
        let b: Vec<f64> = self.nodes.e.iter().map(|e| -e).collect();
        let dphi = self.lower.solve(b.clone())?;
        let cq = self.disc.lower.diff_q(&b);
        let cp = self.disc.lower.normal_at_interface(&dphi);
        Ok((0..b.len())
            .map(|i| {
                let dpq = self.nodes.e1[i] + cq[i];
                let dpp = 1.0 + self.nodes.e[i] + cp[i];
                self.bern.psi_q[i] * dpq + self.bern.psi_p[i] * dpp - 2.0 * self.state.lambda
            })
            .collect())
    }

    /// ∂F/∂E₀ at the nodes.
    pub fn e0_derivative(&self) -> Result<Vec<f64>> {
        let b: Vec<f64> = self.nodes.e.iter().map(|e| -e).collect();
        let dchi = self.upper.solve(b.clone())?;
        let cq = self.disc.upper.diff_q(&b);
        let cp = self.disc.upper.normal_at_interface(&dchi);
        Ok((0..b.len())
            .map(|i| {
                let dvq = self.nodes.e1[i] + cq[i];
                let dvp = 1.0 - self.nodes.e[i] + cp[i];
                self.bern.v_q[i] * dvq + self.bern.v_p[i] * dvp + 2.0 * self.params.eps0 * self.params.e0
            })
            .collect())
    }
}

/// −(δL)u for a shape direction, where u is the solved correction field.
fn shape_forcing(op: &StripOperator<'_>, u: &FieldDerivatives, d: &ProfileNodes) -> DMatrix<f64> {
    let c = op.coefficients();
    let (nq, np) = u.p.shape();
    DMatrix::from_fn(nq, np, |i, j| {
        let dqp = c.qp_e[(i, j)] * d.e[i] + c.qp_e1[(i, j)] * d.e1[i];
        let dpp = c.pp_e[(i, j)] * d.e[i] + c.pp_e1[(i, j)] * d.e1[i];
        let dp = c.p_e[(i, j)] * d.e[i] + c.p_e1[(i, j)] * d.e1[i] + c.p_e2[(i, j)] * d.e2[i];
        -(dqp * u.qp[(i, j)] + dpp * u.pp[(i, j)] + dp * u.p[(i, j)])
    })
}

/// Square Jacobian in cosine modes. Columns: η_1..η_K, q0. Rows: modes 0..K of F.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaJacobian {
    pub matrix: DMatrix<f64>,
}

impl EtaJacobian {
    pub fn modes(&self) -> usize {
        self.matrix.ncols() - 1
    }

    /// Rows and columns of modes 1..K.
    pub fn eta_block(&self) -> DMatrix<f64> {
        let k = self.modes();
        self.matrix.view((1, 0), (k, k)).into_owned()
    }

    pub fn q0_column(&self) -> Vec<f64> {
        self.matrix.column(self.modes()).iter().copied().collect()
    }
}

/// F at a state.
pub fn assemble_residual(state: &ExtendedState, p: &WaveParams, disc: &Discretization) -> Result<ResidualVector> {
    Ok(Linearization::new(state, p, disc)?.residual().clone())
}

/// Exact Jacobian of the discrete residual with respect to (η modes, q0).
pub fn eta_jacobian(state: &ExtendedState, p: &WaveParams, disc: &Discretization) -> Result<EtaJacobian> {
    Linearization::new(state, p, disc)?.eta_jacobian()
}

/// Central-difference Jacobian, one column per mode and one for q0.
pub fn eta_jacobian_fd(state: &ExtendedState, p: &WaveParams, disc: &Discretization) -> Result<EtaJacobian> {
    let k = disc.modes();
    let base = state.eta.padded(k);
    let scale = base.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let h = 1e-6 * scale;
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for c in 0..k {
        let mut plus = state.clone();
        let mut minus = state.clone();
        plus.eta = base.clone();
        minus.eta = base.clone();
        plus.eta.coeffs_mut()[c] += h;
        minus.eta.coeffs_mut()[c] -= h;
        let rp = assemble_residual(&plus, p, disc)?;
        let rm = assemble_residual(&minus, p, disc)?;
        for r in 0..=k {
            m[(r, c)] = (rp.coeffs[r] - rm.coeffs[r]) / (2.0 * h);
        }
    }
    // F is affine in q0
    m[(0, k)] = -1.0;
    Ok(EtaJacobian { matrix: m })
}

/// ∂D_k/∂λ = −(2/T_k)(2λ − γT_k): the mixed derivative F_λη on cos(kq).
pub fn d_lambda_eta(k: ModeIndex, lambda: f64, p: &WaveParams) -> f64 {
    let t = tk(k);
    -(2.0 / t) * (2.0 * lambda - p.gamma * t)
}

/// ∂D_k/∂E₀ = −(4/T_k)ε₀E₀.
pub fn d_e0_eta(k: ModeIndex, p: &WaveParams) -> f64 {
    -(4.0 / tk(k)) * p.eps0 * p.e0
}

/// Flat-state interface slopes w_p[u], h_p[u] of a cosine profile at the nodes.
fn trace_fields(u: &SurfaceProfile, lambda: f64, p: &WaveParams, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut w = SurfaceProfile::zero(u.coeffs().len());
    let mut h = SurfaceProfile::zero(u.coeffs().len());
    for (i, &a) in u.coeffs().iter().enumerate() {
        let k = mode(i + 1);
        w.coeffs_mut()[i] = a * stream_trace(k, lambda, p.gamma);
        h.coeffs_mut()[i] = a * voltage_trace(k, p.e0);
    }
    (w.evaluate(q).e, h.evaluate(q).e)
}

/// Closed-form second derivative of F at the flat state (polarized diagonal form).
pub fn second_derivative(d1: &SurfaceProfile, d2: &SurfaceProfile, lambda: f64, p: &WaveParams, disc: &Discretization) -> ResidualVector {
    second_derivative_on(d1, d2, lambda, p, &disc.transform)
}

/// [`second_derivative`] on an arbitrary half grid.
pub fn second_derivative_on(d1: &SurfaceProfile, d2: &SurfaceProfile, lambda: f64, p: &WaveParams, transform: &CosineTransform) -> ResidualVector {
    let nodes = transform.nodes();
    let q = &nodes[..];
    let (u, v) = (d1.evaluate(q), d2.evaluate(q));
    let (wu, hu) = trace_fields(d1, lambda, p, q);
    let (wv, hv) = trace_fields(d2, lambda, p, q);
    let c = lambda * lambda - p.field_energy();
    let values = (0..q.len())
        .map(|i| {
            2.0 * c * (u.e1[i] * v.e1[i] + 3.0 * u.e[i] * v.e[i]) - 2.0 * p.eps0 * hu[i] * hv[i] + 2.0 * wu[i] * wv[i]
                - 4.0 * p.eps0 * p.e0 * (u.e[i] * hv[i] + v.e[i] * hu[i])
                - 4.0 * lambda * (u.e[i] * wv[i] + v.e[i] * wu[i])
        })
        .collect();
    ResidualVector::from_values(values, transform)
}

/// Closed-form third derivative F_ηηη[η, η, η] at the flat state.
pub fn third_derivative(d: &SurfaceProfile, lambda: f64, p: &WaveParams, disc: &Discretization) -> ResidualVector {
    third_derivative_on(d, lambda, p, &disc.transform)
}

/// [`third_derivative`] on an arbitrary half grid.
pub fn third_derivative_on(d: &SurfaceProfile, lambda: f64, p: &WaveParams, transform: &CosineTransform) -> ResidualVector {
    let nodes = transform.nodes();
    let q = &nodes[..];
    let u = d.evaluate(q);
    let (w, h) = trace_fields(d, lambda, p, q);
    let c = lambda * lambda + p.field_energy();
    let ee = p.eps0 * p.e0;
    let values = (0..q.len())
        .map(|i| {
            let (e, e1, e2) = (u.e[i], u.e1[i], u.e2[i]);
            -12.0 * c * e1 * e1 * e - 24.0 * c * e * e * e + 18.0 * p.sigma * e2 * e1 * e1 + 12.0 * lambda * e1 * e1 * w[i]
                + 36.0 * lambda * e * e * w[i]
                - 12.0 * ee * e1 * e1 * h[i]
                - 36.0 * ee * e * e * h[i]
                - 4.0 * e * w[i] * w[i]
                - 4.0 * p.eps0 * e * h[i] * h[i]
        })
        .collect();
    ResidualVector::from_values(values, transform)
}

/// The nine-term closed form of ⟨l̃, F_ηηη[cos kq]³⟩.
pub fn cubic_projection_closed_form(k: ModeIndex, lambda: f64, p: &WaveParams) -> f64 {
    let t = tk(k);
    let kf = k.as_f64();
    let w = ((p.gamma + lambda) * t - lambda) / t;
    let hh = (1.0 - t) / t;
    let c = lambda * lambda + p.field_energy();
    let ee2 = p.field_energy();
    -3.0 * kf * kf * c - 18.0 * c - 4.5 * kf.powi(4) * p.sigma + 3.0 * kf * kf * lambda * w + 27.0 * lambda * w
        - 3.0 * kf * kf * ee2 * hh
        - 27.0 * ee2 * hh
        - 3.0 * w * w
        - 3.0 * p.eps0 * hh * hh * p.e0 * p.e0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::dispersion;

    #[test]
    fn trivial_state_has_zero_residual() {
        let disc = Discretization::new(16, 12).unwrap();
        let p = WaveParams::new(1.0, 0.5, 0.3, 1.0, 0.4).unwrap();
        let r = assemble_residual(&ExtendedState::trivial(0.8, 7), &p, &disc).unwrap();
        assert!(r.sup_norm() < 1e-14);
    }

    #[test]
    fn exact_jacobian_matches_fd() {
        let disc = Discretization::new(16, 14).unwrap();
        let p = WaveParams::new(1.0, 0.5, 0.3, 1.0, 0.4).unwrap();
        let state = ExtendedState { eta: SurfaceProfile::new(vec![0.05, 0.02, -0.01]), lambda: 0.8, q0: 0.01 };
        let a = eta_jacobian(&state, &p, &disc).unwrap();
        let b = eta_jacobian_fd(&state, &p, &disc).unwrap();
        let scale = b.matrix.amax();
        assert!((a.matrix - b.matrix).amax() < 1e-7 * scale);
    }

    #[test]
    fn lambda_and_e0_derivatives_match_fd() {
        let disc = Discretization::new(16, 14).unwrap();
        let p = WaveParams::new(1.0, 0.5, 0.3, 1.0, 0.4).unwrap();
        let state = ExtendedState { eta: SurfaceProfile::new(vec![0.05, 0.02]), lambda: 0.8, q0: 0.0 };
        let lin = Linearization::new(&state, &p, &disc).unwrap();
        let dl = lin.lambda_derivative().unwrap();
        let de = lin.e0_derivative().unwrap();
        let h = 1e-6;
        let shift = |dl: f64, de: f64| {
            let mut s = state.clone();
            s.lambda += dl;
            assemble_residual(&s, &p.with_e0(p.e0 + de), &disc).unwrap().values
        };
        let (lp, lm) = (shift(h, 0.0), shift(-h, 0.0));
        let (ep, em) = (shift(0.0, h), shift(0.0, -h));
        for i in 0..dl.len() {
            assert!((dl[i] - (lp[i] - lm[i]) / (2.0 * h)).abs() < 1e-7);
            assert!((de[i] - (ep[i] - em[i]) / (2.0 * h)).abs() < 1e-7);
        }
    }

    #[test]
    fn diagonal_symbol_at_flat_state() {
        let disc = Discretization::new(24, 20).unwrap();
        let p = WaveParams::new(1.0, 1.0, 0.3, 1.0, 0.5).unwrap();
        let j = eta_jacobian(&ExtendedState::trivial(0.7, 11), &p, &disc).unwrap();
        for k in 1..=6 {
            let d = dispersion(mode(k), 0.7, &p);
            assert!((j.matrix[(k, k - 1)] - d).abs() < 1e-8 * d.abs().max(1.0));
        }
        assert_eq!(j.q0_column()[0], -1.0);
        assert!(j.q0_column()[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_form_derivative_values() {
        let p = WaveParams::new(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let k = mode(2);
        assert!((d_lambda_eta(k, 0.5, &p) + 4.0 / tk(k) * 0.5).abs() < 1e-15);
        assert_eq!(d_e0_eta(k, &p), 0.0);
    }
}
