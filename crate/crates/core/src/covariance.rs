//! Covariance of the linear solution `v(t, x)` from closed-form time factors.
//!
//! `E[v(t,x) v(t',x')] = ∫ cos⟨ξ, x - x'⟩ T(t, t', |ξ|) μ(dξ)` where `T` is the heat
//! factor `I` or the wave factor `J`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kind;
use crate::measures::{cosine_transform, dalang_integral, Component, MeasureFamily, RadialFactor, SpectralMeasure};
use crate::special::gauss_legendre;

/// `I(ξ) = ∫_0^t e^{-(t-s)|ξ|²/2} e^{-(t'-s)|ξ|²/2} ds` for `t ≤ t'` (arguments are sorted).
pub fn time_factor_heat(t: f64, t_prime: f64, xi_norm: f64) -> f64 {
    let (t, tp) = sorted(t, t_prime);
    let r2 = xi_norm * xi_norm;
    if t == 0.0 {
        return 0.0;
    }
    if r2 == 0.0 {
        return t;
    }
    let delta = tp - t;
    // (e^{-Δr²/2} - e^{-(t+t')r²/2}) / r² without cancellation
    (-0.5 * delta * r2).exp() * (-(-t * r2).exp_m1()) / r2
}

const WAVE_SERIES_FROM: f64 = 0.1;

/// `J(ξ) = ∫_0^t sin((t-s)|ξ|) sin((t'-s)|ξ|) / |ξ|² ds` for `t ≤ t'` (arguments are sorted).
pub fn time_factor_wave(t: f64, t_prime: f64, xi_norm: f64) -> f64 {
    let (t, tp) = sorted(t, t_prime);
    let w = xi_norm.abs();
    if t == 0.0 {
        return 0.0;
    }
    let delta = tp - t;
    if w * t >= WAVE_SERIES_FROM {
        return (t * (delta * w).cos() - (tp * w).cos() * (t * w).sin() / w) / (2.0 * w * w);
    }
    // small ωt: the integrand is smooth and polynomial-like on [0, t]
    let (x, g) = gauss_legendre(16);
    let sinc = |a: f64| {
        let z = a * w;
        if z.abs() < 1e-6 {
            a * (1.0 - z * z / 6.0)
        } else {
            z.sin() / w
        }
    };
    x.iter()
        .zip(&g)
        .map(|(xi, gi)| {
            let s = 0.5 * t * (xi + 1.0);
            0.5 * t * gi * sinc(t - s) * sinc(tp - s)
        })
        .sum()
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn time_factor(kind: Kind, t: f64, t_prime: f64, xi_norm: f64) -> f64 {
    match kind {
        Kind::Heat => time_factor_heat(t, t_prime, xi_norm),
        Kind::Wave => time_factor_wave(t, t_prime, xi_norm),
    }
}

/// `C` with `|T(t, t', ξ)| ≤ C / (1 + |ξ|²)`.
pub fn domination_constant(kind: Kind, t: f64, t_prime: f64) -> f64 {
    let (t, tp) = sorted(t, t_prime);
    match kind {
        // I ≤ t and I ≤ 1/|ξ|²
        Kind::Heat => 1.0 + t,
        // |J| ≤ t²t' and |J| ≤ t/|ξ|²
        Kind::Wave => 2.0 * t * (1.0f64).max(t * tp),
    }
}

/// A time factor as a radial function for the spectral integral engine.
#[derive(Debug, Clone, Copy)]
pub struct TimeFactor {
    pub kind: Kind,
    pub t: f64,
    pub t_prime: f64,
}

impl RadialFactor for TimeFactor {
    fn value(&self, r: f64) -> f64 {
        time_factor(self.kind, self.t, self.t_prime, r)
    }

    fn components(&self) -> Vec<Component> {
        let (t, tp) = sorted(self.t, self.t_prime);
        match self.kind {
            Kind::Heat => {
                let f = *self;
                vec![Component::new(move |r| f.value(r), 0.0, 0.0, 2.0)]
            }
            Kind::Wave => {
                if t == 0.0 {
                    return Vec::new();
                }
                let (delta, sum) = (tp - t, tp + t);
                vec![
                    Component::new(move |r| t / (2.0 * r * r), delta, 0.0, 2.0),
                    Component::new(|r| 1.0 / (4.0 * r * r * r), sum, FRAC_PI_2, 3.0),
                    Component::new(|r| 1.0 / (4.0 * r * r * r), delta, -FRAC_PI_2, 3.0),
                ]
            }
        }
    }

    fn asymptotic_from(&self) -> f64 {
        match self.kind {
            Kind::Heat => 0.0,
            Kind::Wave => WAVE_SERIES_FROM / self.t.min(self.t_prime).max(1e-300),
        }
    }

    fn max_frequency(&self) -> f64 {
        match self.kind {
            Kind::Heat => 0.0,
            Kind::Wave => self.t + self.t_prime,
        }
    }
}

/// One covariance query `(t, x, t', x')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub t: f64,
    pub x: Vec<f64>,
    pub t_prime: f64,
    pub x_prime: Vec<f64>,
}

impl Pair {
    pub fn new(t: f64, x: Vec<f64>, t_prime: f64, x_prime: Vec<f64>) -> Self {
        Pair { t, x, t_prime, x_prime }
    }

    /// The same query with `t ≤ t'`.
    pub fn ordered(&self) -> Pair {
        if self.t <= self.t_prime {
            self.clone()
        } else {
            Pair { t: self.t_prime, x: self.x_prime.clone(), t_prime: self.t, x_prime: self.x.clone() }
        }
    }

    fn lag(&self) -> Vec<f64> {
        self.x.iter().zip(&self.x_prime).map(|(a, b)| a - b).collect()
    }
}

/// `E[v(t,x) v(t',x')]` for each pair, to absolute tolerance `tol`.
pub fn covariance(kind: Kind, m: &SpectralMeasure, pairs: &[Pair], tol: f64) -> Result<Vec<f64>> {
    if !dalang_integral(m, tol.max(1e-8))?.is_finite() {
        return Err(Error::Divergent(format!("{} does not satisfy Dalang's condition", m.label())));
    }
    for p in pairs {
        if p.x.len() != m.dimension() || p.x_prime.len() != m.dimension() {
            return Err(Error::InvalidParameter("query point dimension does not match the measure".into()));
        }
        if p.t < 0.0 || p.t_prime < 0.0 {
            return Err(Error::InvalidParameter("query times must be non-negative".into()));
        }
    }
    pairs
        .par_iter()
        .map(|p| {
            let p = p.ordered();
            if p.t == 0.0 {
                return Ok(0.0);
            }
            let factor = TimeFactor { kind, t: p.t, t_prime: p.t_prime };
            Ok(cosine_transform(m, &p.lag(), &factor, tol)?.value)
        })
        .collect()
}

/// For each member, `max_pairs |cov_{μ_n} - cov_μ|`.
pub fn covariance_distance(fam: &MeasureFamily, kind: Kind, pairs: &[Pair], tol: f64) -> Result<Vec<f64>> {
    let limit = covariance(kind, fam.limit(), pairs, tol)?;
    fam.members()
        .iter()
        .map(|m| {
            let c = covariance(kind, m, pairs, tol)?;
            Ok(c.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect()
}
