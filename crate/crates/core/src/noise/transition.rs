//! Exact one-step Gaussian transitions of a single Fourier mode.

use crate::kernels::Kind;
use crate::special::half_x_minus_sin2x;

/// `a ← decay · a + std · z` for the heat mode `da = -|ξ|²/2 a dt + dβ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatTransition {
    pub decay: f64,
    pub variance: f64,
}

pub fn heat_transition(xi_norm: f64, dt: f64) -> HeatTransition {
    let r2 = xi_norm * xi_norm;
    let variance = if r2 == 0.0 { dt } else { -(-r2 * dt).exp_m1() / r2 };
    HeatTransition { decay: (-0.5 * r2 * dt).exp(), variance }
}

/// `(a, c) ← M (a, c) + η` with `η ~ N(0, Q)` for the oscillator
/// `da = c dt`, `dc = -|ξ|² a dt + dβ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveTransition {
    pub matrix: [[f64; 2]; 2],
    pub noise: [[f64; 2]; 2],
    /// Lower Cholesky factor of `noise`.
    pub chol: [[f64; 2]; 2],
}

pub fn wave_transition(omega: f64, dt: f64) -> WaveTransition {
    let w = omega.abs();
    let (matrix, noise) = if w == 0.0 {
        ([[1.0, dt], [0.0, 1.0]], [[dt * dt * dt / 3.0, dt * dt / 2.0], [dt * dt / 2.0, dt]])
    } else {
        let x = w * dt;
        let (s, c) = x.sin_cos();
        let var_a = half_x_minus_sin2x(x) / (w * w * w);
        let var_c = dt / 2.0 + (2.0 * x).sin() / (4.0 * w);
        let cov = s * s / (2.0 * w * w);
        ([[c, s / w], [-w * s, c]], [[var_a, cov], [cov, var_c]])
    };
    WaveTransition { matrix, noise, chol: cholesky2(noise) }
}

fn cholesky2(q: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l00 = q[0][0].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { q[1][0] / l00 } else { 0.0 };
    let l11 = (q[1][1] - l10 * l10).max(0.0).sqrt();
    [[l00, 0.0], [l10, l11]]
}

/// Joint covariance of the mode state `(a, c)` at a sequence of times, started
/// from rest at time 0. Heat states carry `c = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTrace {
    pub times: Vec<f64>,
    /// `cov[i][j] = E[a(t_i) a(t_j)]`
    pub cov: Vec<Vec<f64>>,
}

/// Propagates second moments through the exact transitions at `times` (increasing, first > 0).
pub fn propagate_covariance(kind: Kind, xi_norm: f64, times: &[f64]) -> CovarianceTrace {
    let n = times.len();
    // states as 2-vectors; keep the full covariance via the transition matrices
    let mut var: Vec<[[f64; 2]; 2]> = Vec::with_capacity(n);
    let mut mats: Vec<[[f64; 2]; 2]> = Vec::with_capacity(n);
    let mut prev_t = 0.0;
    let mut v = [[0.0; 2]; 2];
    for &t in times {
        let dt = t - prev_t;
        let (m, q) = match kind {
            Kind::Heat => {
                let h = heat_transition(xi_norm, dt);
                ([[h.decay, 0.0], [0.0, 0.0]], [[h.variance, 0.0], [0.0, 0.0]])
            }
            Kind::Wave => {
                let w = wave_transition(xi_norm, dt);
                (w.matrix, w.noise)
            }
        };
        v = add(mul(mul(m, v), transpose(m)), q);
        var.push(v);
        mats.push(m);
        prev_t = t;
    }
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        // E[X_j X_i^T] = (M_j ⋯ M_{i+1}) V_i for j ≥ i
        let mut p = var[i];
        cov[i][i] = p[0][0];
        for j in i + 1..n {
            p = mul(mats[j], p);
            cov[j][i] = p[0][0];
            cov[i][j] = p[0][0];
        }
    }
    CovarianceTrace { times: times.to_vec(), cov }
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn add(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn transpose(a: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Composes two transitions: the pair `(M, Q)` of doing `first` then `second`.
pub fn compose(first: ([[f64; 2]; 2], [[f64; 2]; 2]), second: ([[f64; 2]; 2], [[f64; 2]; 2])) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let (m1, q1) = first;
    let (m2, q2) = second;
    (mul(m2, m1), add(mul(mul(m2, q1), transpose(m2)), q2))
}
