//! Weakly nonlinear expansion of F about the flat state, including the shape derivatives of the
//! elliptic fields themselves.
//!
//! At the flat state the interior problems reduce, mode by mode, to Dirichlet-to-Neumann maps with
//! symbol G_n = n·coth(n) on both strips (with G_0 = 1 for the unit depth). Expanding the traces in
//! powers of η gives the second and third variations below; they are checked against finite
//! differences of the assembled residual in the test suite.

use crate::params::{dispersion, mode, ModeIndex, WaveParams};
use crate::residual::{d_lambda_eta, ResidualVector};
use crate::spectral::CosineTransform;
use crate::strip::SurfaceProfile;

/// Oversampled half-grid on which the pseudo-spectral products are formed.
struct Workspace {
    t: CosineTransform,
    q: Vec<f64>,
    dtn: Vec<f64>,
}

impl Workspace {
    fn new(top_mode: usize) -> Self {
        let h = (8 * top_mode.max(1) + 16).max(32);
        let t = CosineTransform::new(2 * h);
        let q = (0..=h).map(|i| std::f64::consts::PI * i as f64 / h as f64).collect();
        let dtn = (0..=h).map(|n| if n == 0 { 1.0 } else { n as f64 / (n as f64).tanh() }).collect();
        Self { t, q, dtn }
    }

    fn map(&self, v: &[f64], symbol: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let c: Vec<f64> = self.t.coeffs(v).iter().enumerate().map(|(n, a)| symbol(n, *a)).collect();
        self.t.values(&c)
    }

    /// Dirichlet-to-Neumann map.
    fn g(&self, v: &[f64]) -> Vec<f64> {
        self.map(v, |n, a| self.dtn[n] * a)
    }

    fn dqq(&self, v: &[f64]) -> Vec<f64> {
        self.map(v, |n, a| -((n * n) as f64) * a)
    }

    /// q-derivative of an even function (odd values).
    fn dq(&self, v: &[f64]) -> Vec<f64> {
        let c = self.t.coeffs(v);
        self.q
            .iter()
            .map(|&q| c.iter().enumerate().map(|(n, a)| -(n as f64) * a * (n as f64 * q).sin()).sum())
            .collect()
    }

    fn profile(&self, u: &SurfaceProfile) -> Vec<f64> {
        u.evaluate(&self.q).e
    }

    fn finish(&self, values: Vec<f64>) -> ResidualVector {
        ResidualVector::from_values(values, &self.t)
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn lin(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let n = terms[0].1.len();
    (0..n).map(|i| terms.iter().map(|(c, v)| c * v[i]).sum()).collect()
}

fn second_values(w: &Workspace, u: &[f64], v: &[f64], lambda: f64, p: &WaveParams) -> Vec<f64> {
    let (gu, gv) = (w.g(u), w.g(v));
    let (uq, vq) = (w.dq(u), w.dq(v));
    let (uqq, vqq) = (w.dqq(u), w.dqq(v));
    let guv = w.g(&mul(u, v));
    let cross = w.g(&lin(&[(1.0, &mul(u, &gv)), (1.0, &mul(v, &gu))]));
    let curv = lin(&[(1.0, &mul(u, &vqq)), (1.0, &mul(v, &uqq))]);
    let ee = p.field_energy();
    let l2 = lambda * lambda;
    (0..u.len())
        .map(|i| {
            let stream = -lambda * p.gamma * guv[i] + l2 * cross[i] + l2 * curv[i]
                + (p.gamma * u[i] - lambda * gu[i]) * (p.gamma * v[i] - lambda * gv[i])
                + l2 * uq[i] * vq[i];
            let field = cross[i] + curv[i] + gu[i] * gv[i] + uq[i] * vq[i];
            2.0 * (stream - ee * field)
        })
        .collect()
}

fn cubic_values(w: &Workspace, e: &[f64], lambda: f64, p: &WaveParams) -> Vec<f64> {
    let n = e.len();
    let e2h: Vec<f64> = e.iter().map(|x| 0.5 * x * x).collect();
    // liquid side
    let a: Vec<f64> = e.iter().map(|x| -lambda * x).collect();
    let a1 = w.g(&a);
    let b: Vec<f64> = (0..n).map(|i| -p.gamma * e2h[i] - e[i] * a1[i]).collect();
    let b1 = w.g(&b);
    let app = w.dqq(&a);
    let c: Vec<f64> = (0..n).map(|i| -e[i] * b1[i] + e2h[i] * app[i]).collect();
    let c1 = w.g(&c);
    let (bpp, a1pp) = (w.dqq(&b), w.dqq(&a1));
    let (aq, bq, a1q) = (w.dq(&a), w.dq(&b), w.dq(&a1));
    // gas side: the normal points the other way, so the map enters with a minus sign
    let au: Vec<f64> = e.iter().map(|x| -p.e0 * x).collect();
    let a1u: Vec<f64> = w.g(&au).iter().map(|x| -x).collect();
    let bu: Vec<f64> = (0..n).map(|i| -e[i] * a1u[i]).collect();
    let b1u: Vec<f64> = w.g(&bu).iter().map(|x| -x).collect();
    let aupp = w.dqq(&au);
    let cu: Vec<f64> = (0..n).map(|i| -e[i] * b1u[i] + e2h[i] * aupp[i]).collect();
    let c1u: Vec<f64> = w.g(&cu).iter().map(|x| -x).collect();
    let (bupp, a1upp) = (w.dqq(&bu), w.dqq(&a1u));
    let (auq, buq, a1uq) = (w.dq(&au), w.dq(&bu), w.dq(&a1u));
    let (eq, eqq) = (w.dq(e), w.dqq(e));
    (0..n)
        .map(|i| {
            let y1 = p.gamma * e[i] + a1[i];
            let y2 = b1[i] - e[i] * app[i];
            let y3 = c1[i] - e[i] * bpp[i] - e2h[i] * a1pp[i];
            let x1 = aq[i];
            let x2 = bq[i] + e[i] * a1q[i];
            let stream = 2.0 * lambda * y3 + 2.0 * y1 * y2 + 2.0 * x1 * x2;
            let y1u = a1u[i];
            let y2u = b1u[i] - e[i] * aupp[i];
            let y3u = c1u[i] - e[i] * bupp[i] - e2h[i] * a1upp[i];
            let x1u = auq[i];
            let x2u = buq[i] + e[i] * a1uq[i];
            let field = 2.0 * p.e0 * y3u + 2.0 * y1u * y2u + 2.0 * x1u * x2u;
            // F_ηηη[η,η,η] = 6 × (third-order Taylor coefficient)
            6.0 * (stream - p.eps0 * field + 3.0 * p.sigma * eqq[i] * eq[i] * eq[i])
        })
        .collect()
}

fn top(u: &SurfaceProfile) -> usize {
    u.max_mode().max(1)
}

/// F_ηη[u, v] at the flat state, on an oversampled grid.
pub fn second_variation(u: &SurfaceProfile, v: &SurfaceProfile, lambda: f64, p: &WaveParams) -> ResidualVector {
    let w = Workspace::new(top(u).max(top(v)));
    let vals = second_values(&w, &w.profile(u), &w.profile(v), lambda, p);
    w.finish(vals)
}

/// F_ηηη[η, η, η] at the flat state, on an oversampled grid.
pub fn third_variation(eta: &SurfaceProfile, lambda: f64, p: &WaveParams) -> ResidualVector {
    let w = Workspace::new(top(eta));
    let vals = cubic_values(&w, &w.profile(eta), lambda, p);
    w.finish(vals)
}

/// λ″(0) of the mode-k branch from a Lyapunov–Schmidt reduction.
///
/// The quadratic variation F_ηη[x*, x*] is not zero here (only its kernel projection is), so the
/// second-order shape correction x₂ = −F_η⁻¹F_ηη[x*, x*] feeds back into the cubic balance:
/// λ″(0) = −(⟨l, F_ηηη[x*]³⟩ + 3⟨l, F_ηη[x*, x₂]⟩) / (3⟨l, F_λη x*⟩).
pub fn reduced_curvature(k: ModeIndex, lambda: f64, p: &WaveParams) -> f64 {
    let kk = k.get();
    let w = Workspace::new(3 * kk);
    let x = w.profile(&SurfaceProfile::single(kk, 1.0, kk));
    let f2 = w.t.coeffs(&second_values(&w, &x, &x, lambda, p));
    // mean row is taken up by the Bernoulli correction, so x₂ has no mean
    let mut c2 = vec![0.0; f2.len()];
    for (n, c) in c2.iter_mut().enumerate().take(f2.len() - 1).skip(1) {
        if n != kk {
            *c = -f2[n] / dispersion(mode(n), lambda, p);
        }
    }
    let x2 = w.t.values(&c2);
    let t3 = w.t.coeffs(&cubic_values(&w, &x, lambda, p))[kk];
    let t2 = w.t.coeffs(&second_values(&w, &x, &x2, lambda, p))[kk];
    -(t3 + 3.0 * t2) / (3.0 * d_lambda_eta(k, lambda, p))
}

/// Second-order shape correction x₂ of the mode-k branch, η(s) = s·cos(kq) + (s²/2)x₂ + O(s³).
pub fn second_order_shape(k: ModeIndex, lambda: f64, p: &WaveParams, modes: usize) -> SurfaceProfile {
    let kk = k.get();
    let x = SurfaceProfile::single(kk, 1.0, kk);
    let f2 = second_variation(&x, &x, lambda, p);
    let mut c = vec![0.0; modes];
    for (i, slot) in c.iter_mut().enumerate() {
        let n = i + 1;
        if n != kk && n < f2.coeffs.len() - 1 {
            *slot = -f2.coeffs[n] / dispersion(mode(n), lambda, p);
        }
    }
    SurfaceProfile::new(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::bifurcation_speeds;

    #[test]
    fn kernel_projection_of_second_variation_vanishes() {
        let p = WaveParams::new(1.0, 1.0, 1.0, 0.3, 0.5).unwrap();
        for k in 1..4 {
            let lam = bifurcation_speeds(mode(k), &p).unwrap().unwrap().plus;
            let x = SurfaceProfile::single(k, 1.0, k);
            let r = second_variation(&x, &x, lam, &p);
            assert!(r.projection(k).abs() < 1e-12);
        }
    }

    #[test]
    fn second_variation_is_symmetric() {
        let p = WaveParams::new(1.0, 1.0, 0.4, 1.0, 0.5).unwrap();
        let u = SurfaceProfile::new(vec![0.3, 0.0, 1.0]);
        let v = SurfaceProfile::new(vec![0.0, 1.0, -0.2]);
        let a = second_variation(&u, &v, 0.9, &p);
        let b = second_variation(&v, &u, 0.9, &p);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_curvature_reference_values() {
        // cross-checked against quadratic fits of continued branches
        let p = WaveParams::new(1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let lam = |k| bifurcation_speeds(mode(k), &p).unwrap().unwrap().plus;
        assert!((reduced_curvature(mode(1), lam(1), &p) + 3.37476).abs() < 1e-4);
        assert!((reduced_curvature(mode(2), lam(2), &p) + 4.64989).abs() < 1e-4);
        let grav = WaveParams::new(1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let l1 = bifurcation_speeds(mode(1), &grav).unwrap().unwrap().plus;
        assert!((reduced_curvature(mode(1), l1, &grav) - 0.87341).abs() < 1e-4);
        // minus branch mirrors the plus branch when γ = 0
        assert!((reduced_curvature(mode(1), -lam(1), &p) - 3.37476).abs() < 1e-4);
    }
}
