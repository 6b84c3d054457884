//! Variable-coefficient elliptic solves on the two flattened strips.
//!
//! Fields are split as ψ = Ψ̄(Y) + φ and V = E₀Y + χ, with Y the physical height of a strip
//! point. The flattened operator sends any function of Y to its second derivative, so Ψ̄ and E₀Y
//! carry the forcing and φ, χ solve homogeneous problems with interface data only.
//!
//! Grids cover the half period q ∈ [0, π]; evenness is built into the folded differentiation
//! matrices. Vertical index 0 is the interface p = 0 on both strips.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::params::WaveParams;
use crate::spectral::{chebyshev_lobatto, FourierHalf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StripSide {
    /// Liquid layer, p ∈ [−1, 0].
    Lower,
    /// Gas layer, p ∈ [0, 1].
    Upper,
}

impl StripSide {
    /// +1 below the interface, −1 above: the flattening uses 1 + s·η.
    pub fn orientation(self) -> f64 {
        match self {
            StripSide::Lower => 1.0,
            StripSide::Upper => -1.0,
        }
    }
}

/// Collocation grid on one strip: M periodic nodes (half of them stored) by N Chebyshev nodes.
#[derive(Debug, Clone)]
pub struct StripGrid {
    m: usize,
    n: usize,
    side: StripSide,
    fourier: FourierHalf,
    p: Vec<f64>,
    dp: DMatrix<f64>,
    dpp: DMatrix<f64>,
}

impl StripGrid {
    pub fn new(m: usize, n: usize, side: StripSide) -> Result<Self> {
        if m < 8 || !m.is_multiple_of(2) {
            return Err(WaveError::InvalidGrid(format!("M must be even and >= 8, got {m}")));
        }
        if n < 8 {
            return Err(WaveError::InvalidGrid(format!("N must be >= 8, got {n}")));
        }
        let fourier = FourierHalf::new(m);
        let (x, dx) = chebyshev_lobatto(n - 1);
        // x = 1 ↦ p = 0 on both sides
        let (p, scale) = match side {
            StripSide::Lower => (x.iter().map(|x| 0.5 * (x - 1.0)).collect::<Vec<_>>(), 2.0),
            StripSide::Upper => (x.iter().map(|x| 0.5 * (1.0 - x)).collect::<Vec<_>>(), -2.0),
        };
        let dp = dx * scale;
        let dpp = &dp * &dp;
        Ok(Self { m, n, side, fourier, p, dp, dpp })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> StripSide {
        self.side
    }

    /// Number of stored q-nodes (M/2 + 1).
    pub fn nq(&self) -> usize {
        self.fourier.len()
    }

    pub fn q_nodes(&self) -> &[f64] {
        &self.fourier.nodes
    }

    pub fn p_nodes(&self) -> &[f64] {
        &self.p
    }

    pub fn fourier(&self) -> &FourierHalf {
        &self.fourier
    }

    pub fn dp(&self) -> &DMatrix<f64> {
        &self.dp
    }

    /// Highest cosine mode the grid resolves (M ≥ 2·mode + 2).
    pub fn max_mode(&self) -> usize {
        self.m / 2 - 1
    }

    /// Unknowns of the dense interior system.
    pub fn interior_size(&self) -> usize {
        self.nq() * (self.n - 2)
    }

    /// ∂/∂q at the nodes of an even function.
    pub fn diff_q(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.fourier.d1, v)
    }

    /// ∂/∂p at p = 0 of a full-grid field.
    pub fn normal_at_interface(&self, u: &DMatrix<f64>) -> Vec<f64> {
        (0..self.nq()).map(|i| (0..self.n).map(|j| self.dp[(0, j)] * u[(i, j)]).sum()).collect()
    }
}

pub(crate) fn mat_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum()).collect()
}

/// Even, zero-mean interface profile η = Σ_{n≥1} a_n cos(nq).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceProfile {
    /// coeffs[n − 1] is the coefficient of cos(nq).
    coeffs: Vec<f64>,
}

/// η, η′, η″ at a set of q-nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileNodes {
    pub e: Vec<f64>,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
}

impl SurfaceProfile {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(modes: usize) -> Self {
        Self { coeffs: vec![0.0; modes] }
    }

    /// amplitude·cos(kq), padded to `modes` coefficients.
    pub fn single(k: usize, amplitude: f64, modes: usize) -> Self {
        let mut coeffs = vec![0.0; modes.max(k)];
        coeffs[k - 1] = amplitude;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Vec<f64> {
        &mut self.coeffs
    }

    /// Coefficient of cos(kq); zero when not stored.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    /// Highest mode with a nonzero coefficient (0 for the flat profile).
    pub fn max_mode(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1)
    }

    pub fn padded(&self, modes: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(modes.max(self.max_mode()), 0.0);
        Self { coeffs }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// Analytic values and derivatives of the cosine series.
    pub fn evaluate(&self, q: &[f64]) -> ProfileNodes {
        let mut out = ProfileNodes { e: vec![0.0; q.len()], e1: vec![0.0; q.len()], e2: vec![0.0; q.len()] };
        for (idx, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let n = (idx + 1) as f64;
            for (i, &qi) in q.iter().enumerate() {
                let (s, c) = (n * qi).sin_cos();
                out.e[i] += a * c;
                out.e1[i] -= a * n * s;
                out.e2[i] -= a * n * n * c;
            }
        }
        out
    }

    /// sup|η| sampled on a grid four times finer than the highest mode needs.
    pub fn sup_norm(&self) -> f64 {
        let samples = 8 * self.max_mode().max(1) + 64;
        let q: Vec<f64> = (0..=samples).map(|i| std::f64::consts::PI * i as f64 / samples as f64).collect();
        self.evaluate(&q).e.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Kernel projection (1/π)∫η cos(kq) dq.
    pub fn amplitude(&self, k: usize) -> f64 {
        self.coeff(k)
    }
}

/// Domain and resolution checks shared by every solve.
pub fn check_profile(eta: &SurfaceProfile, grid: &StripGrid) -> Result<()> {
    let top = eta.max_mode();
    if top > grid.max_mode() {
        return Err(WaveError::UnresolvedProfile { mode: top, capacity: grid.max_mode() });
    }
    if eta.coeffs.iter().any(|c| !c.is_finite()) {
        return Err(WaveError::NonfiniteResidual);
    }
    let sup = eta.sup_norm();
    if sup >= 1.0 {
        return Err(WaveError::DomainBreach { sup });
    }
    Ok(())
}

/// Coefficients of the flattened operator
/// u_qq + c_qp u_qp + c_pp u_pp + c_p u_p at every node, with first derivatives in (η, η′, η″).
#[derive(Debug, Clone)]
pub(crate) struct OperatorCoefficients {
    pub qp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub qp_e: DMatrix<f64>,
    pub qp_e1: DMatrix<f64>,
    pub pp_e: DMatrix<f64>,
    pub pp_e1: DMatrix<f64>,
    pub p_e: DMatrix<f64>,
    pub p_e1: DMatrix<f64>,
    pub p_e2: DMatrix<f64>,
}

impl OperatorCoefficients {
    fn new(grid: &StripGrid, nodes: &ProfileNodes) -> Self {
        let s = grid.side.orientation();
        let (nq, np) = (grid.nq(), grid.n);
        let z = || DMatrix::<f64>::zeros(nq, np);
        let mut c = Self { qp: z(), pp: z(), p: z(), qp_e: z(), qp_e1: z(), pp_e: z(), pp_e1: z(), p_e: z(), p_e1: z(), p_e2: z() };
        for i in 0..nq {
            let (e, e1, e2) = (nodes.e[i], nodes.e1[i], nodes.e2[i]);
            let den = 1.0 + s * e;
            for j in 0..np {
                let a = 1.0 + s * grid.p[j];
                let w = a * a * e1 * e1 + 1.0;
                c.qp[(i, j)] = -2.0 * a * e1 / den;
                c.pp[(i, j)] = w / (den * den);
                c.p[(i, j)] = -a * e2 / den + s * 2.0 * a * e1 * e1 / (den * den);
                c.qp_e[(i, j)] = 2.0 * a * e1 * s / (den * den);
                c.qp_e1[(i, j)] = -2.0 * a / den;
                c.pp_e[(i, j)] = -2.0 * s * w / (den * den * den);
                c.pp_e1[(i, j)] = 2.0 * a * a * e1 / (den * den);
                c.p_e[(i, j)] = s * a * e2 / (den * den) - 4.0 * a * e1 * e1 / (den * den * den);
                c.p_e1[(i, j)] = 4.0 * s * a * e1 / (den * den);
                c.p_e2[(i, j)] = -a / den;
            }
        }
        c
    }
}

/// Derivatives of a full-grid field needed to apply the operator and its shape derivative.
#[derive(Debug, Clone)]
pub(crate) struct FieldDerivatives {
    pub qp: DMatrix<f64>,
    pub pp: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

/// The assembled and factored operator of one strip for a fixed η.
pub struct StripOperator<'g> {
    grid: &'g StripGrid,
    coeffs: OperatorCoefficients,
    lu: PartialPivLu<f64>,
}

impl<'g> StripOperator<'g> {
    pub fn assemble(grid: &'g StripGrid, nodes: &ProfileNodes) -> Result<Self> {
        let coeffs = OperatorCoefficients::new(grid, nodes);
        let (nq, ni) = (grid.nq(), grid.n - 2);
        let f = &grid.fourier;
        let (dp, dpp) = (&grid.dp, &grid.dpp);
        let size = nq * ni;
        let a = Mat::<f64>::from_fn(size, size, |r, c| {
            let (i, j) = (r / ni, r % ni + 1);
            let (ii, jj) = (c / ni, c % ni + 1);
            let mut v = coeffs.qp[(i, j)] * f.d1[(i, ii)] * dp[(j, jj)];
            if j == jj {
                v += f.d2[(i, ii)];
            }
            if i == ii {
                v += coeffs.pp[(i, j)] * dpp[(j, jj)] + coeffs.p[(i, j)] * dp[(j, jj)];
            }
            v
        });
        let lu = a.partial_piv_lu();
        Ok(Self { grid, coeffs, lu })
    }

    pub fn grid(&self) -> &StripGrid {
        self.grid
    }

    pub(crate) fn coefficients(&self) -> &OperatorCoefficients {
        &self.coeffs
    }

    pub(crate) fn derivatives(&self, u: &DMatrix<f64>) -> FieldDerivatives {
        let f = &self.grid.fourier;
        let dpt = self.grid.dp.transpose();
        let p = u * &dpt;
        FieldDerivatives { qp: &f.d1 * &p, pp: u * self.grid.dpp.transpose(), p }
    }

    /// Operator applied to a full-grid field, at every node.
    pub fn apply(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.derivatives(u);
        let uqq = &self.grid.fourier.d2 * u;
        let c = &self.coeffs;
        uqq + c.qp.component_mul(&d.qp) + c.pp.component_mul(&d.pp) + c.p.component_mul(&d.p)
    }

    /// Solve L u = f in the interior with u = `interface[i]` at p = 0 and u = 0 on the far wall,
    /// for several right-hand sides at once. `forcing` entries of `None` mean f = 0.
    pub fn solve_batch(&self, interface: &[Vec<f64>], forcing: &[Option<DMatrix<f64>>]) -> Result<Vec<DMatrix<f64>>> {
        assert_eq!(interface.len(), forcing.len());
        let (nq, np) = (self.grid.nq(), self.grid.n);
        let ni = np - 2;
        let mut rhs = Mat::<f64>::zeros(nq * ni, interface.len());
        let mut lifts = Vec::with_capacity(interface.len());
        for (col, (b, f)) in interface.iter().zip(forcing).enumerate() {
            let mut lift = DMatrix::<f64>::zeros(nq, np);
            for i in 0..nq {
                lift[(i, 0)] = b[i];
            }
            let lb = self.apply(&lift);
            for i in 0..nq {
                for j in 1..np - 1 {
                    let fv = f.as_ref().map_or(0.0, |f| f[(i, j)]);
                    rhs[(i * ni + j - 1, col)] = fv - lb[(i, j)];
                }
            }
            lifts.push(lift);
        }
        self.lu.solve_in_place(&mut rhs);
        let mut out = Vec::with_capacity(lifts.len());
        for (col, mut u) in lifts.into_iter().enumerate() {
            for i in 0..nq {
                for j in 1..np - 1 {
                    let v = rhs[(i * ni + j - 1, col)];
                    if !v.is_finite() {
                        return Err(WaveError::SingularSystem("nonfinite solution".into()));
                    }
                    u[(i, j)] = v;
                }
            }
            out.push(u);
        }
        Ok(out)
    }

    pub fn solve(&self, interface: Vec<f64>) -> Result<DMatrix<f64>> {
        Ok(self.solve_batch(&[interface], &[None])?.pop().unwrap())
    }
}

/// ψ or V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Stream,
    Voltage,
}

/// Tangential and normal derivatives at the interface p = 0, on the stored q-nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceTrace {
    pub fq: Vec<f64>,
    pub fp: Vec<f64>,
}

/// Interface data of the correction field and analytic traces of the background profile.
#[derive(Debug, Clone)]
pub(crate) struct Background {
    pub interface: Vec<f64>,
    pub tq: Vec<f64>,
    pub tp: Vec<f64>,
}

/// Ψ̄ = γY²/2 + λY below the interface.
pub(crate) fn stream_background(nodes: &ProfileNodes, lambda: f64, gamma: f64) -> Background {
    let n = nodes.e.len();
    let mut bg = Background { interface: vec![0.0; n], tq: vec![0.0; n], tp: vec![0.0; n] };
    for i in 0..n {
        let e = nodes.e[i];
        let slope = gamma * e + lambda;
        bg.interface[i] = -(0.5 * gamma * e * e + lambda * e);
        bg.tq[i] = slope * nodes.e1[i];
        bg.tp[i] = slope * (1.0 + e);
    }
    bg
}

/// E₀Y above the interface.
pub(crate) fn voltage_background(nodes: &ProfileNodes, e0: f64) -> Background {
    Background {
        interface: nodes.e.iter().map(|e| -e0 * e).collect(),
        tq: nodes.e1.iter().map(|e1| e0 * e1).collect(),
        tp: nodes.e.iter().map(|e| e0 * (1.0 - e)).collect(),
    }
}

/// A solved field on one strip.
#[derive(Debug, Clone)]
pub struct StripField {
    pub kind: FieldKind,
    pub side: StripSide,
    /// Full field at every node, indexed (q-node, p-node).
    pub values: DMatrix<f64>,
    /// The homogeneous correction φ or χ.
    pub correction: DMatrix<f64>,
    background: InterfaceTrace,
}

impl StripField {
    /// Interface traces of the background profile alone.
    pub fn background_trace(&self) -> &InterfaceTrace {
        &self.background
    }
}

fn physical_height(side: StripSide, p: f64, e: f64) -> f64 {
    match side {
        StripSide::Lower => p * (1.0 + e) + e,
        StripSide::Upper => p * (1.0 - e) + e,
    }
}

fn build_field(kind: FieldKind, grid: &StripGrid, bg: Background, correction: DMatrix<f64>, nodes: &ProfileNodes, profile: impl Fn(f64) -> f64) -> StripField {
    let mut values = correction.clone();
    for i in 0..grid.nq() {
        for j in 0..grid.n {
            values[(i, j)] += profile(physical_height(grid.side, grid.p[j], nodes.e[i]));
        }
        // boundary rows exactly as prescribed
        values[(i, 0)] = profile(nodes.e[i]) + bg.interface[i];
        values[(i, grid.n - 1)] = profile(physical_height(grid.side, grid.p[grid.n - 1], nodes.e[i]));
    }
    StripField { kind, side: grid.side, values, correction, background: InterfaceTrace { fq: bg.tq, fp: bg.tp } }
}

/// Stream function in the liquid: ψ = 0 at the interface, ψ = γ/2 − λ at the bed.
pub fn solve_stream(eta: &SurfaceProfile, lambda: f64, p: &WaveParams, grid: &StripGrid) -> Result<StripField> {
    if grid.side != StripSide::Lower {
        return Err(WaveError::InvalidGrid("stream function lives on the lower strip".into()));
    }
    check_profile(eta, grid)?;
    let nodes = eta.evaluate(grid.q_nodes());
    let op = StripOperator::assemble(grid, &nodes)?;
    let bg = stream_background(&nodes, lambda, p.gamma);
    let corr = op.solve(bg.interface.clone())?;
    let gamma = p.gamma;
    Ok(build_field(FieldKind::Stream, grid, bg, corr, &nodes, |y| 0.5 * gamma * y * y + lambda * y))
}

/// Voltage in the gas: V = 0 at the interface, V = E₀ at the top electrode.
pub fn solve_voltage(eta: &SurfaceProfile, e0: f64, _p: &WaveParams, grid: &StripGrid) -> Result<StripField> {
    if grid.side != StripSide::Upper {
        return Err(WaveError::InvalidGrid("voltage lives on the upper strip".into()));
    }
    check_profile(eta, grid)?;
    let nodes = eta.evaluate(grid.q_nodes());
    let op = StripOperator::assemble(grid, &nodes)?;
    let bg = voltage_background(&nodes, e0);
    let corr = op.solve(bg.interface.clone())?;
    Ok(build_field(FieldKind::Voltage, grid, bg, corr, &nodes, |y| e0 * y))
}

/// (∂_q, ∂_p) of a solved field at p = 0.
pub fn interface_traces(field: &StripField, grid: &StripGrid) -> InterfaceTrace {
    assert_eq!(field.side, grid.side, "field and grid sides differ");
    assert_eq!(field.correction.shape(), (grid.nq(), grid.n), "field not solved on this grid");
    let c0: Vec<f64> = (0..grid.nq()).map(|i| field.correction[(i, 0)]).collect();
    let cq = grid.diff_q(&c0);
    let cp = grid.normal_at_interface(&field.correction);
    InterfaceTrace {
        fq: field.background.fq.iter().zip(&cq).map(|(a, b)| a + b).collect(),
        fp: field.background.fp.iter().zip(&cp).map(|(a, b)| a + b).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WaveParams {
        WaveParams::new(1.0, 1.0, 0.4, 1.0, 0.6).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(StripGrid::new(6, 16, StripSide::Lower).is_err());
        assert!(StripGrid::new(9, 16, StripSide::Lower).is_err());
        assert!(StripGrid::new(16, 7, StripSide::Lower).is_err());
        let g = StripGrid::new(16, 12, StripSide::Upper).unwrap();
        assert_eq!(g.p_nodes()[0], 0.0);
        assert!((g.p_nodes()[11] - 1.0).abs() < 1e-15);
        assert_eq!(g.max_mode(), 7);
    }

    #[test]
    fn flat_state_is_exact() {
        let p = params();
        let lo = StripGrid::new(16, 12, StripSide::Lower).unwrap();
        let up = StripGrid::new(16, 12, StripSide::Upper).unwrap();
        let flat = SurfaceProfile::zero(3);
        let psi = solve_stream(&flat, 0.7, &p, &lo).unwrap();
        let v = solve_voltage(&flat, p.e0, &p, &up).unwrap();
        for i in 0..lo.nq() {
            for (j, &pj) in lo.p_nodes().iter().enumerate() {
                assert!((psi.values[(i, j)] - (0.5 * p.gamma * pj * pj + 0.7 * pj)).abs() < 1e-15);
            }
            for (j, &pj) in up.p_nodes().iter().enumerate() {
                assert!((v.values[(i, j)] - p.e0 * pj).abs() < 1e-15);
            }
        }
        let t = interface_traces(&psi, &lo);
        assert!(t.fq.iter().all(|x| x.abs() < 1e-15));
        assert!(t.fp.iter().all(|x| (x - 0.7).abs() < 1e-15));
        let t = interface_traces(&v, &up);
        assert!(t.fp.iter().all(|x| (x - p.e0).abs() < 1e-15));
    }

    #[test]
    fn boundary_values_and_maximum_principle() {
        let p = params();
        let lo = StripGrid::new(16, 12, StripSide::Lower).unwrap();
        let up = StripGrid::new(16, 12, StripSide::Upper).unwrap();
        let eta = SurfaceProfile::new(vec![0.03, -0.01, 0.01]);
        let psi = solve_stream(&eta, 0.7, &p, &lo).unwrap();
        let m = p.gamma / 2.0 - 0.7;
        for i in 0..lo.nq() {
            assert!(psi.values[(i, 0)].abs() < 1e-15);
            assert!((psi.values[(i, 11)] - m).abs() < 1e-14);
        }
        let v = solve_voltage(&eta, p.e0, &p, &up).unwrap();
        for i in 0..up.nq() {
            for j in 0..up.n() {
                assert!(v.values[(i, j)] >= -1e-12 && v.values[(i, j)] <= p.e0 + 1e-12);
            }
        }
    }

    #[test]
    fn correction_solves_homogeneous_problem() {
        let lo = StripGrid::new(16, 14, StripSide::Lower).unwrap();
        let eta = SurfaceProfile::new(vec![0.1, 0.05]);
        let nodes = eta.evaluate(lo.q_nodes());
        let op = StripOperator::assemble(&lo, &nodes).unwrap();
        let u = op.solve(nodes.e.iter().map(|e| e * e).collect()).unwrap();
        let r = op.apply(&u);
        for i in 0..lo.nq() {
            for j in 1..lo.n() - 1 {
                assert!(r[(i, j)].abs() < 1e-10, "{}", r[(i, j)]);
            }
        }
    }

    #[test]
    fn errors() {
        let p = params();
        let lo = StripGrid::new(16, 12, StripSide::Lower).unwrap();
        let up = StripGrid::new(16, 12, StripSide::Upper).unwrap();
        assert!(matches!(solve_stream(&SurfaceProfile::single(8, 0.01, 8), 0.5, &p, &lo), Err(WaveError::UnresolvedProfile { .. })));
        assert!(matches!(solve_stream(&SurfaceProfile::single(1, 1.2, 3), 0.5, &p, &lo), Err(WaveError::DomainBreach { .. })));
        assert!(solve_stream(&SurfaceProfile::zero(2), 0.5, &p, &up).is_err());
        assert!(solve_voltage(&SurfaceProfile::zero(2), 0.5, &p, &lo).is_err());
    }
}
