//! Collocation building blocks: Chebyshev–Lobatto differentiation, even-folded Fourier
//! differentiation on the half period, the discrete cosine transform on those nodes, and
//! Gauss–Legendre quadrature.

use nalgebra::DMatrix;
use std::f64::consts::PI;

/// Chebyshev–Lobatto nodes x_j = cos(πj/n), j = 0..n, and the differentiation matrix.
pub fn chebyshev_lobatto(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    assert!(n >= 1);
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| -> f64 {
        let w = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            w
        } else {
            -w
        }
    };
    let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    // negative-sum trick keeps D·1 = 0 to round-off
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Fourier differentiation on the half grid q_i = 2πi/m, i = 0..=m/2, for even functions.
///
/// The full periodic matrices are folded with f(q_{m−j}) = f(q_j). The first derivative maps
/// even node values to odd node values (zero at both ends).
#[derive(Debug, Clone)]
pub struct FourierHalf {
    pub m: usize,
    pub nodes: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl FourierHalf {
    pub fn new(m: usize) -> Self {
        assert!(m >= 4 && m.is_multiple_of(2), "m must be even and >= 4");
        let h = m / 2;
        let step = 2.0 * PI / m as f64;
        let nodes: Vec<f64> = (0..=h).map(|i| step * i as f64).collect();
        let mut d1 = DMatrix::<f64>::zeros(h + 1, h + 1);
        let mut d2 = DMatrix::<f64>::zeros(h + 1, h + 1);
        for i in 0..=h {
            for j in 0..m {
                let (e1, e2) = if i == j {
                    (0.0, -PI * PI / (3.0 * step * step) - 1.0 / 6.0)
                } else {
                    let d = i as i64 - j as i64;
                    let sgn = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    let half = d as f64 * step / 2.0;
                    (0.5 * sgn / half.tan(), -sgn / (2.0 * half.sin().powi(2)))
                };
                let jj = if j <= h { j } else { m - j };
                d1[(i, jj)] += e1;
                d2[(i, jj)] += e2;
            }
        }
        Self { m, nodes, d1, d2 }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Exact cosine interpolation on the half grid: node values ↔ coefficients of modes 0..=h.
///
/// f(q_i) = Σ_n a_n cos(n q_i). Coefficient n (0 < n < h) equals (1/π)∫f cos(nq) dq for resolved f.
#[derive(Debug, Clone)]
pub struct CosineTransform {
    pub h: usize,
    /// values = synth · coeffs
    synth: DMatrix<f64>,
    /// coeffs = analysis · values
    analysis: DMatrix<f64>,
}

impl CosineTransform {
    pub fn new(m: usize) -> Self {
        assert!(m >= 4 && m.is_multiple_of(2));
        let h = m / 2;
        let step = 2.0 * PI / m as f64;
        let synth = DMatrix::from_fn(h + 1, h + 1, |i, n| ((n * i) as f64 * step).cos());
        let analysis = DMatrix::from_fn(h + 1, h + 1, |n, i| {
            let wi = if i == 0 || i == h { 0.5 } else { 1.0 };
            let wn = if n == 0 || n == h { 0.5 } else { 1.0 };
            2.0 / h as f64 * wi * wn * ((n * i) as f64 * step).cos()
        });
        Self { h, synth, analysis }
    }

    pub fn coeffs(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.h + 1);
        (0..=self.h)
            .map(|n| (0..=self.h).map(|i| self.analysis[(n, i)] * values[i]).sum())
            .collect()
    }

    pub fn values(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.h + 1);
        (0..=self.h)
            .map(|i| coeffs.iter().enumerate().map(|(n, c)| self.synth[(i, n)] * c).sum())
            .collect()
    }

    /// Half-grid nodes q_i = πi/h.
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.h).map(|i| PI * i as f64 / self.h as f64).collect()
    }

    pub fn analysis_matrix(&self) -> &DMatrix<f64> {
        &self.analysis
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|t| half * t).collect())
}
