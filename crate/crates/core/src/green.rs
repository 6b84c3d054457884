//! Per-mode vertical problems at the flat state, solved with the closed-form Green's functions
//! of ∂²/∂p² − k² under Dirichlet conditions.

use serde::{Deserialize, Serialize};

use crate::params::{tk, ModeIndex, WaveParams};
use crate::spectral::gauss_legendre_on;

/// Gauss–Legendre nodes per subinterval used by the mode solves.
pub const QUADRATURE_NODES: usize = 48;

/// Green's function on the lower interval [−1, 0].
pub fn green_lower(k: ModeIndex, p: f64, r: f64) -> f64 {
    let kf = k.as_f64();
    let (lo, hi) = if p <= r { (p, r) } else { (r, p) };
    (kf * (1.0 + lo)).sinh() * (kf * hi).sinh() / (kf * kf.sinh())
}

/// Green's function on the upper interval [0, 1].
pub fn green_upper(k: ModeIndex, p: f64, r: f64) -> f64 {
    let kf = k.as_f64();
    let (lo, hi) = if p <= r { (p, r) } else { (r, p) };
    -(kf * lo).sinh() * (kf * (1.0 - hi)).sinh() / (kf * kf.sinh())
}

/// ∂G/∂p at the interface p = 0 (lower interval).
fn green_lower_trace(k: ModeIndex, r: f64) -> f64 {
    let kf = k.as_f64();
    (kf * (1.0 + r)).sinh() / kf.sinh()
}

/// ∂G/∂p at the interface p = 0 (upper interval).
fn green_upper_trace(k: ModeIndex, r: f64) -> f64 {
    let kf = k.as_f64();
    -(kf * (1.0 - r)).sinh() / kf.sinh()
}

/// Solve u″ − k²u = f on [a, b] with zero end values by quadrature against `green`.
///
/// The integral is split at p so each piece sees a smooth kernel.
pub fn green_solve(
    green: impl Fn(f64, f64) -> f64,
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    points: &[f64],
    nodes: usize,
) -> Vec<f64> {
    points
        .iter()
        .map(|&p| {
            let mut acc = 0.0;
            for (lo, hi) in [(a, p), (p, b)] {
                if hi - lo <= 0.0 {
                    continue;
                }
                let (x, w) = gauss_legendre_on(nodes, lo, hi);
                acc += x.iter().zip(&w).map(|(&r, &wr)| wr * green(p, r) * f(r)).sum::<f64>();
            }
            acc
        })
        .collect()
}

/// A vertical mode profile with its interface slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSolution {
    pub p: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope at p = 0 from differentiating the Green's representation under the integral.
    pub trace_quadrature: f64,
    /// Exponential closed form.
    pub trace_exponential: f64,
    /// Simplified closed form in T_k.
    pub trace_closed: f64,
}

/// Forcing of the stream-function mode problem.
pub fn stream_forcing(k: ModeIndex, lambda: f64, gamma: f64) -> impl Fn(f64) -> f64 {
    let k2 = k.as_f64().powi(2);
    move |r| 2.0 * gamma - (1.0 + r) * (gamma * r + lambda) * k2
}

/// Forcing of the voltage mode problem.
pub fn voltage_forcing(k: ModeIndex, e0: f64) -> impl Fn(f64) -> f64 {
    let k2 = k.as_f64().powi(2);
    move |r| e0 * (r - 1.0) * k2
}

fn uniform(ngrid: usize, a: f64, b: f64) -> Vec<f64> {
    (0..ngrid).map(|i| a + (b - a) * i as f64 / (ngrid - 1) as f64).collect()
}

/// ((γ+λ)T_k − λ)/T_k.
pub fn stream_trace(k: ModeIndex, lambda: f64, gamma: f64) -> f64 {
    let t = tk(k);
    ((gamma + lambda) * t - lambda) / t
}

/// ((1 − T_k)/T_k)E₀.
pub fn voltage_trace(k: ModeIndex, e0: f64) -> f64 {
    let t = tk(k);
    (1.0 - t) / t * e0
}

/// Stream-function mode w_k on [−1, 0]; `ngrid` equispaced points from p = −1 to 0.
pub fn mode_solve_w(k: ModeIndex, lambda: f64, p: &WaveParams, ngrid: usize) -> ModeSolution {
    assert!(ngrid >= 2);
    let f = stream_forcing(k, lambda, p.gamma);
    let pts = uniform(ngrid, -1.0, 0.0);
    let values = green_solve(|a, b| green_lower(k, a, b), &f, -1.0, 0.0, &pts, QUADRATURE_NODES);
    let (x, w) = gauss_legendre_on(QUADRATURE_NODES, -1.0, 0.0);
    let trace_quadrature = x.iter().zip(&w).map(|(&r, &wr)| wr * green_lower_trace(k, r) * f(r)).sum();
    let (kf, g) = (k.as_f64(), p.gamma);
    let trace_exponential =
        ((g + lambda - lambda * kf) * kf.exp() - (g + lambda + lambda * kf) * (-kf).exp()) / (2.0 * kf.sinh());
    ModeSolution { p: pts, values, trace_quadrature, trace_exponential, trace_closed: stream_trace(k, lambda, g) }
}

/// Voltage mode h_k on [0, 1]; `ngrid` equispaced points from p = 0 to 1.
pub fn mode_solve_h(k: ModeIndex, e0: f64, ngrid: usize) -> ModeSolution {
    assert!(ngrid >= 2);
    let f = voltage_forcing(k, e0);
    let pts = uniform(ngrid, 0.0, 1.0);
    let values = green_solve(|a, b| green_upper(k, a, b), &f, 0.0, 1.0, &pts, QUADRATURE_NODES);
    let (x, w) = gauss_legendre_on(QUADRATURE_NODES, 0.0, 1.0);
    let trace_quadrature = x.iter().zip(&w).map(|(&r, &wr)| wr * green_upper_trace(k, r) * f(r)).sum();
    let kf = k.as_f64();
    let trace_exponential = ((kf - 1.0) * kf.exp() + (kf + 1.0) * (-kf).exp()) / (2.0 * kf.sinh()) * e0;
    ModeSolution { p: pts, values, trace_quadrature, trace_exponential, trace_closed: voltage_trace(k, e0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::mode;

    #[test]
    fn green_boundary_and_symmetry() {
        for k in [1, 3, 8] {
            let k = mode(k);
            for r in [-0.9, -0.5, -0.1] {
                assert_eq!(green_lower(k, 0.0, r), 0.0);
                assert!(green_lower(k, -1.0, r).abs() < 1e-15);
                assert!((green_lower(k, -0.3, r) - green_lower(k, r, -0.3)).abs() < 1e-15);
            }
            for r in [0.1, 0.5, 0.9] {
                assert_eq!(green_upper(k, 0.0, r), 0.0);
                assert!(green_upper(k, 1.0, r).abs() < 1e-15);
                assert!(green_upper(k, 0.4, r) < 0.0);
            }
            assert_eq!(green_upper(k, 0.3, 0.7), green_upper(k, 0.7, 0.3));
        }
    }

    #[test]
    fn green_satisfies_ode_away_from_diagonal() {
        let k = mode(3);
        let r = -0.4;
        let h = 1e-4;
        for p in [-0.9, -0.7, -0.2, -0.05] {
            let g = |x: f64| green_lower(k, x, r);
            let lap = (g(p + h) - 2.0 * g(p) + g(p - h)) / (h * h) - 9.0 * g(p);
            assert!(lap.abs() < 1e-6, "{lap}");
        }
        // unit jump in slope across the diagonal
        let jump = (green_lower(k, r + h, r) - green_lower(k, r, r)) / h - (green_lower(k, r, r) - green_lower(k, r - h, r)) / h;
        assert!((jump - 1.0).abs() < 1e-3);
    }

    #[test]
    fn trace_values() {
        let p = WaveParams::new(1.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let w = mode_solve_w(mode(1), 1.0, &p, 16);
        assert!((w.trace_closed - (1.0 - 1.0 / 1f64.tanh())).abs() < 1e-15);
        assert!((w.trace_closed + 0.3130353).abs() < 1e-7);
        assert!(w.values[0].abs() < 1e-14 && w.values[15].abs() < 1e-14);
        let h = mode_solve_h(mode(1), 1.0, 16);
        assert!((h.trace_closed - 0.3130353).abs() < 1e-7);
        let h2 = mode_solve_h(mode(1), 2.0, 16);
        for (a, b) in h.values.iter().zip(&h2.values) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
        assert!(mode_solve_h(mode(4), 0.0, 16).values.iter().all(|v| *v == 0.0));
    }
}
