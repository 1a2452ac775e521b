//! Spectral measures and the integrability hypotheses evaluated on them.

mod hypotheses;
mod integrals;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use hypotheses::{
    anisotropic_dalang_condition, dalang_integral, default_dictionary, default_h_grid, default_q, h1_characterization,
    h1_check, h1_integral, h2_distance, HypothesisReport, MeasureFamily, TestFunction, Verdicts,
};
pub use integrals::{
    angular_mass, cosine_transform, radial_integral, Component, DalangWeight, Integral, RadialFactor, RadialRange,
};

use crate::error::{invalid, Result};
use crate::special::{gamma, gauss_legendre};

/// `C_H = Γ(2H+1) sin(πH) / (2π)`, the constant of the fractional spectral density.
pub fn fractional_constant(h: f64) -> f64 {
    gamma(2.0 * h + 1.0) * (PI * h).sin() / (2.0 * PI)
}

/// `c_α = Γ((d-α)/2) / (2^α π^{d/2} Γ(d/2))`, the Riesz spectral constant.
pub fn riesz_constant(d: usize, alpha: f64) -> f64 {
    let d = d as f64;
    gamma((d - alpha) / 2.0) / (2f64.powf(alpha) * PI.powf(d / 2.0) * gamma(d / 2.0))
}

/// Radial profile `r ↦ f(r)` of a tabulated density.
#[derive(Clone)]
pub struct RadialProfile {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `f(r) ~ r^origin_exponent` as `r → 0`.
    pub origin_exponent: f64,
    /// `f(r) ~ r^radial_decay_hint` as `r → ∞`.
    pub radial_decay_hint: f64,
}

impl RadialProfile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, origin_exponent: f64, radial_decay_hint: f64) -> Self {
        RadialProfile { f: Arc::new(f), origin_exponent, radial_decay_hint }
    }

    /// Log-log interpolation through `(r_i, f_i)` knots, extended by power laws:
    /// the first segment's slope towards the origin and `radial_decay_hint` beyond
    /// the last knot.
    pub fn from_table(r: &[f64], f: &[f64], radial_decay_hint: f64) -> Result<Self> {
        if r.len() < 2 || r.len() != f.len() {
            return Err(invalid("a tabulated profile needs at least two (r, value) knots of equal length"));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) || r[0] <= 0.0 {
            return Err(invalid("tabulated radii must be positive and strictly increasing"));
        }
        if f.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(invalid("tabulated density values must be positive and finite"));
        }
        let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
        let lf: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        let s0 = (lf[1] - lf[0]) / (lr[1] - lr[0]);
        let n = lr.len();
        let profile = move |x: f64| {
            if x <= 0.0 {
                return if s0 < 0.0 { f64::INFINITY } else if s0 == 0.0 { lf[0].exp() } else { 0.0 };
            }
            let l = x.ln();
            let v = if l <= lr[0] {
                lf[0] + s0 * (l - lr[0])
            } else if l >= lr[n - 1] {
                lf[n - 1] + radial_decay_hint * (l - lr[n - 1])
            } else {
                let i = lr.partition_point(|&v| v <= l) - 1;
                let w = (l - lr[i]) / (lr[i + 1] - lr[i]);
                lf[i] + w * (lf[i + 1] - lf[i])
            };
            v.exp()
        };
        Ok(RadialProfile::new(profile, s0, radial_decay_hint))
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.f)(r)
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("origin_exponent", &self.origin_exponent)
            .field("radial_decay_hint", &self.radial_decay_hint)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Variant {
    FractionalLine { h: f64 },
    AnisotropicFractional { h: Vec<f64> },
    Riesz { alpha: f64 },
    IsotropicFractional { h: f64 },
    Tabulated(RadialProfile),
}

/// Angular factor `φ(ω)` of a density written as `R(|ξ|) φ(ξ/|ξ|)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Angular {
    Constant(f64),
    /// `coef · ∏_j |ω_j|^{a_j}`
    Product { coef: f64, a: Vec<f64> },
}

/// A symmetric absolutely continuous measure on R^d given by its density.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    dim: usize,
    variant: Variant,
}

impl SpectralMeasure {
    pub fn fractional_line(h: f64) -> Result<Self> {
        check_hurst(h)?;
        Ok(SpectralMeasure { dim: 1, variant: Variant::FractionalLine { h } })
    }

    pub fn anisotropic(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(invalid("anisotropic measure needs at least one Hurst index"));
        }
        for &v in &h {
            check_hurst(v)?;
        }
        Ok(SpectralMeasure { dim: h.len(), variant: Variant::AnisotropicFractional { h } })
    }

    pub fn riesz(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < dim as f64) {
            return Err(invalid(format!("Riesz order must lie in (0, {dim}), got {alpha}")));
        }
        Ok(SpectralMeasure { dim, variant: Variant::Riesz { alpha } })
    }

    pub fn isotropic(dim: usize, h: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        check_hurst(h)?;
        Ok(SpectralMeasure { dim, variant: Variant::IsotropicFractional { h } })
    }

    pub fn tabulated(dim: usize, profile: RadialProfile) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if profile.origin_exponent <= -(dim as f64) {
            return Err(invalid("tabulated density is not locally integrable at the origin"));
        }
        Ok(SpectralMeasure { dim, variant: Variant::Tabulated(profile) })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    /// Lebesgue density at `xi`; `+∞` at the singular points of the power factors.
    pub fn density(&self, xi: &[f64]) -> f64 {
        debug_assert_eq!(xi.len(), self.dim);
        match &self.variant {
            Variant::FractionalLine { h } => power_abs(xi[0], 1.0 - 2.0 * h) * fractional_constant(*h),
            Variant::AnisotropicFractional { h } => h
                .iter()
                .zip(xi)
                .map(|(&hj, &x)| fractional_constant(hj) * power_abs(x, 1.0 - 2.0 * hj))
                .product(),
            Variant::Riesz { alpha } => riesz_constant(self.dim, *alpha) * power_abs(norm(xi), alpha - self.dim as f64),
            Variant::IsotropicFractional { h } => {
                let r2: f64 = xi.iter().map(|x| x * x).sum();
                if r2 == 0.0 {
                    return if self.dim as f64 - 2.0 * h < 0.0 { f64::INFINITY } else { 0.0 };
                }
                let num: f64 = xi.iter().map(|x| x * x).product();
                num / r2.powf(h + self.dim as f64 / 2.0)
            }
            Variant::Tabulated(p) => p.eval(norm(xi)),
        }
    }

    /// Exponent `p` with `R(r) ~ r^p` at the origin.
    pub fn origin_exponent(&self) -> f64 {
        match &self.variant {
            Variant::Tabulated(p) => p.origin_exponent,
            _ => self.homogeneity().expect("homogeneous"),
        }
    }

    /// Exponent `s` with `R(r) ~ r^s` as `r → ∞`.
    pub fn tail_exponent(&self) -> f64 {
        match &self.variant {
            Variant::Tabulated(p) => p.radial_decay_hint,
            _ => self.homogeneity().expect("homogeneous"),
        }
    }

    /// Degree of homogeneity for the power-law variants.
    pub fn homogeneity(&self) -> Option<f64> {
        let d = self.dim as f64;
        match &self.variant {
            Variant::FractionalLine { h } => Some(1.0 - 2.0 * h),
            Variant::AnisotropicFractional { h } => Some(h.iter().map(|v| 1.0 - 2.0 * v).sum()),
            Variant::Riesz { alpha } => Some(alpha - d),
            Variant::IsotropicFractional { h } => Some(d - 2.0 * h),
            Variant::Tabulated(_) => None,
        }
    }

    /// Radial factor `R(r)`.
    pub(crate) fn radial_part(&self, r: f64) -> f64 {
        match &self.variant {
            Variant::Tabulated(p) => p.eval(r),
            _ => power_abs(r, self.homogeneity().expect("homogeneous")),
        }
    }

    /// `R(r) / r^{origin_exponent}`, bounded near the origin.
    pub(crate) fn radial_regular_part(&self, r: f64) -> f64 {
        match &self.variant {
            Variant::Tabulated(p) => {
                let r = r.max(1e-300);
                p.eval(r) / r.powf(p.origin_exponent)
            }
            _ => 1.0,
        }
    }

    pub(crate) fn angular(&self) -> Angular {
        match &self.variant {
            Variant::FractionalLine { h } => Angular::Constant(fractional_constant(*h)),
            Variant::AnisotropicFractional { h } => Angular::Product {
                coef: h.iter().map(|&v| fractional_constant(v)).product(),
                a: h.iter().map(|v| 1.0 - 2.0 * v).collect(),
            },
            Variant::Riesz { alpha } => Angular::Constant(riesz_constant(self.dim, *alpha)),
            Variant::IsotropicFractional { .. } => {
                if self.dim == 1 {
                    Angular::Constant(1.0)
                } else {
                    Angular::Product { coef: 1.0, a: vec![2.0; self.dim] }
                }
            }
            Variant::Tabulated(_) => Angular::Constant(1.0),
        }
    }

    /// Short human-readable description.
    pub fn label(&self) -> String {
        match &self.variant {
            Variant::FractionalLine { h } => format!("fractional-line(H={h})"),
            Variant::AnisotropicFractional { h } => format!("anisotropic(H={h:?})"),
            Variant::Riesz { alpha } => format!("riesz(d={}, alpha={alpha})", self.dim),
            Variant::IsotropicFractional { h } => format!("isotropic(d={}, H={h})", self.dim),
            Variant::Tabulated(p) => format!("tabulated(d={}, decay={})", self.dim, p.radial_decay_hint),
        }
    }

    /// Mass and centroid of the measure on the box `lo..hi`.
    pub fn cell_moments(&self, lo: &[f64], hi: &[f64]) -> CellMoments {
        assert_eq!(lo.len(), self.dim);
        assert_eq!(hi.len(), self.dim);
        match &self.variant {
            Variant::FractionalLine { h } => {
                let (m, f) = power_interval_moments(lo[0], hi[0], 1.0 - 2.0 * h);
                let c = fractional_constant(*h);
                CellMoments { mass: c * m, centroid: vec![if m > 0.0 { f / m } else { 0.5 * (lo[0] + hi[0]) }] }
            }
            Variant::AnisotropicFractional { h } => {
                let mut mass = 1.0;
                let mut centroid = Vec::with_capacity(self.dim);
                for j in 0..self.dim {
                    let (m, f) = power_interval_moments(lo[j], hi[j], 1.0 - 2.0 * h[j]);
                    mass *= fractional_constant(h[j]) * m;
                    centroid.push(if m > 0.0 { f / m } else { 0.5 * (lo[j] + hi[j]) });
                }
                CellMoments { mass, centroid }
            }
            _ => {
                let symmetric_about_origin = lo.iter().zip(hi).all(|(a, b)| (a + b).abs() <= 1e-12 * (b - a));
                if symmetric_about_origin {
                    CellMoments { mass: self.centred_cube_mass(lo, hi), centroid: vec![0.0; self.dim] }
                } else {
                    let mut mass = 0.0;
                    let mut first = vec![0.0; self.dim];
                    self.gl_box(lo, hi, 0, &mut mass, &mut first);
                    let centroid = first
                        .iter()
                        .zip(lo.iter().zip(hi))
                        .map(|(f, (a, b))| if mass > 0.0 { f / mass } else { 0.5 * (a + b) })
                        .collect();
                    CellMoments { mass, centroid }
                }
            }
        }
    }

    /// Mass of a box centred at the origin, by decomposing it into pyramids over
    /// its faces and integrating the radial power factor exactly along each ray.
    fn centred_cube_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let d = self.dim;
        let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
        let p = self.origin_exponent() + d as f64 - 1.0;
        let tol = crate::quadrature::Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 200 };
        let (gx, gw) = gauss_legendre(20);
        let mut total = 0.0;
        // the face where coordinate `axis` equals ±half[axis]
        for axis in 0..d {
            let others: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
            let n_nodes = gx.len().pow(others.len() as u32);
            for sign in [-1.0, 1.0] {
                for idx in 0..n_nodes {
                    let mut y = vec![0.0; d];
                    let mut weight = 1.0;
                    let mut rest = idx;
                    y[axis] = sign * half[axis];
                    for &j in &others {
                        let k = rest % gx.len();
                        rest /= gx.len();
                        y[j] = half[j] * gx[k];
                        weight *= half[j] * gw[k];
                    }
                    // ray ξ = s·y, s ∈ [0, 1]; Jacobian of the cone map is half[axis]·s^{d-1}
                    let ry = norm(&y);
                    let f = |s: f64| {
                        let xi: Vec<f64> = y.iter().map(|v| v * s).collect();
                        let r = s * ry;
                        let reg = self.density_regular(&xi, r);
                        reg * ry.powf(self.origin_exponent())
                    };
                    let e = crate::quadrature::integrate_power_origin(&f, p, 1.0, &tol)
                        .map(|e| e.value)
                        .unwrap_or_else(|_| gl_power_fallback(&f, p));
                    total += weight * half[axis] * e;
                }
            }
        }
        total
    }

    /// `density(ξ) / |ξ|^{origin_exponent}` evaluated at `ξ` with `|ξ| = r`.
    fn density_regular(&self, xi: &[f64], r: f64) -> f64 {
        match &self.variant {
            Variant::Tabulated(_) => self.radial_regular_part(r),
            _ => {
                if r == 0.0 {
                    return 0.0;
                }
                let omega: Vec<f64> = xi.iter().map(|v| v / r).collect();
                match self.angular() {
                    Angular::Constant(c) => c,
                    Angular::Product { coef, a } => {
                        coef * omega.iter().zip(&a).map(|(w, &aj)| power_abs(*w, aj)).product::<f64>()
                    }
                }
            }
        }
    }

    fn gl_box(&self, lo: &[f64], hi: &[f64], depth: usize, mass: &mut f64, first: &mut [f64]) {
        let d = self.dim;
        let diam = lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
        let dist = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| {
                let c = if *a > 0.0 { *a } else if *b < 0.0 { -*b } else { 0.0 };
                c * c
            })
            .sum::<f64>()
            .sqrt();
        if dist < diam && depth < 4 {
            let n_sub = 1usize << d;
            for s in 0..n_sub {
                let mut l = lo.to_vec();
                let mut h = hi.to_vec();
                for j in 0..d {
                    let mid = 0.5 * (lo[j] + hi[j]);
                    if (s >> j) & 1 == 0 {
                        h[j] = mid;
                    } else {
                        l[j] = mid;
                    }
                }
                self.gl_box(&l, &h, depth + 1, mass, first);
            }
            return;
        }
        let (gx, gw) = gauss_legendre(6);
        let n_nodes = gx.len().pow(d as u32);
        let mut xi = vec![0.0; d];
        for idx in 0..n_nodes {
            let mut rest = idx;
            let mut w = 1.0;
            for j in 0..d {
                let k = rest % gx.len();
                rest /= gx.len();
                let half = 0.5 * (hi[j] - lo[j]);
                xi[j] = 0.5 * (hi[j] + lo[j]) + half * gx[k];
                w *= half * gw[k];
            }
            let f = self.density(&xi);
            *mass += w * f;
            for j in 0..d {
                first[j] += w * f * xi[j];
            }
        }
    }
}

fn gl_power_fallback<F: Fn(f64) -> f64>(f: &F, p: f64) -> f64 {
    let (gx, gw) = gauss_legendre(24);
    let s = 1.0 / (p + 1.0);
    gx.iter().zip(&gw).map(|(x, w)| 0.5 * w * f((0.5 * (x + 1.0)).powf(s))).sum::<f64>() * s
}

/// Mass and centroid of a measure restricted to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMoments {
    pub mass: f64,
    pub centroid: Vec<f64>,
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("Hurst index must lie in (0, 1), got {h}")))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `|x|^p` with `0^p = +∞` for `p < 0`.
pub(crate) fn power_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 0.0 {
        1.0
    } else if a == 0.0 {
        if p < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        a.powf(p)
    }
}

/// `(∫_a^b |x|^p dx, ∫_a^b x |x|^p dx)` in closed form, `p > -1`.
fn power_interval_moments(a: f64, b: f64, p: f64) -> (f64, f64) {
    // antiderivatives of |x|^p and x|x|^p
    let m0 = |x: f64| x.signum() * x.abs().powf(p + 1.0) / (p + 1.0);
    let m1 = |x: f64| x.abs().powf(p + 2.0) / (p + 2.0);
    (m0(b) - m0(a), m1(b) - m1(a))
}
