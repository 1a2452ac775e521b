//! Integrals of radial and cosine-modulated functions against a spectral measure.
//!
//! Every density is written in polar form `R(r) φ(ω)`. Radial integrands reduce
//! to `A ∫ R(r) r^{d-1} g(r) dr` with the angular mass `A = ∫ φ`; cosine-modulated
//! integrands use the closed spherical average of `cos⟨ξ, v⟩` for radial densities
//! in `d ≤ 3` and nested angular quadrature otherwise.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use serde::{Serialize, Serializer};

use super::{norm, Angular, SpectralMeasure};
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate, integrate_algebraic_tail, integrate_breaks, integrate_fourier_tail, integrate_power_origin,
    integrate_two_sided_power, Estimate, Tolerance,
};
use crate::special::{bessel_j0, hankel_pq, sphere_area};

/// Value of an integral that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integral {
    Finite { value: f64, error: f64 },
    /// Truncated integrals kept growing; `partial` is the value at `cutoff`.
    Divergent { cutoff: f64, partial: f64 },
}

impl Integral {
    pub fn value(&self) -> Option<f64> {
        match self {
            Integral::Finite { value, .. } => Some(*value),
            Integral::Divergent { .. } => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Integral::Finite { .. })
    }
}

impl Serialize for Integral {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Integral::Finite { value, .. } => s.serialize_f64(*value),
            Integral::Divergent { .. } => s.serialize_str("divergent"),
        }
    }
}

/// One term `amp(r) cos(nu r + phase)` of an oscillatory decomposition; `amp`
/// decays at least like `r^{-decay}`.
#[derive(Clone)]
pub struct Component {
    pub amp: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub nu: f64,
    pub phase: f64,
    pub decay: f64,
}

impl Component {
    pub fn new(amp: impl Fn(f64) -> f64 + Send + Sync + 'static, nu: f64, phase: f64, decay: f64) -> Self {
        Component { amp: Arc::new(amp), nu, phase, decay }
    }

    /// Product-to-sum expansion of `self · other`.
    fn times(&self, other: &Component) -> [Component; 2] {
        let (a, b) = (self.amp.clone(), other.amp.clone());
        let amp: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r| 0.5 * a(r) * b(r));
        let decay = self.decay + other.decay;
        let (mut nu_d, mut ph_d) = (self.nu - other.nu, self.phase - other.phase);
        if nu_d < 0.0 {
            nu_d = -nu_d;
            ph_d = -ph_d;
        }
        [
            Component { amp: amp.clone(), nu: nu_d, phase: ph_d, decay },
            Component { amp, nu: self.nu + other.nu, phase: self.phase + other.phase, decay },
        ]
    }
}

/// Radial function multiplying the measure, with an exact oscillatory
/// decomposition valid beyond `asymptotic_from`.
pub trait RadialFactor: Sync {
    fn value(&self, r: f64) -> f64;
    fn components(&self) -> Vec<Component>;
    fn asymptotic_from(&self) -> f64 {
        0.0
    }
    fn max_frequency(&self) -> f64;
}

/// The Dalang weight `1 / (1 + r²)`.
#[derive(Debug, Clone, Copy)]
pub struct DalangWeight;

impl RadialFactor for DalangWeight {
    fn value(&self, r: f64) -> f64 {
        1.0 / (1.0 + r * r)
    }
    fn components(&self) -> Vec<Component> {
        vec![Component::new(|r| 1.0 / (1.0 + r * r), 0.0, 0.0, 2.0)]
    }
    fn max_frequency(&self) -> f64 {
        0.0
    }
}

/// Radial range of a non-oscillatory integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialRange {
    Full,
    /// `|ξ| ≤ R`
    Ball(f64),
    /// `|ξ| > R`
    Outside(f64),
}

fn integrate_angle_weight(a_cos: f64, e_sin: f64, tol: &Tolerance) -> Result<Estimate> {
    let g = move |th: f64| smooth_angle_factor(th, a_cos, e_sin);
    integrate_two_sided_power(&g, 0.0, FRAC_PI_2, e_sin, a_cos, tol)
}

/// `(sin θ / θ)^e (cos θ / (π/2 - θ))^a`, the regular part of `cos^a θ sin^e θ`.
fn smooth_angle_factor(th: f64, a: f64, e: f64) -> f64 {
    let s = if th < 1e-8 { 1.0 - th * th / 6.0 } else { th.sin() / th };
    let u = FRAC_PI_2 - th;
    let c = if u < 1e-8 { 1.0 - u * u / 6.0 } else { th.cos() / u };
    s.powf(e) * c.powf(a)
}

/// Exponents `(a_j, e_j)` of `cos^{a_j} θ_j sin^{e_j} θ_j` for the hyperspherical
/// angles `θ_1..θ_{d-1}` on the positive orthant.
fn orthant_exponents(a: &[f64]) -> Vec<(f64, f64)> {
    let d = a.len();
    (1..d)
        .map(|j| {
            let tail: f64 = a[j..].iter().sum();
            (a[j - 1], (d - 1 - j) as f64 + tail)
        })
        .collect()
}

/// `∫_{S^{d-1}} φ(ω) dω`, computed numerically.
pub fn angular_mass(m: &SpectralMeasure) -> f64 {
    let d = m.dimension();
    match m.angular() {
        Angular::Constant(c) => c * if d == 1 { 2.0 } else { sphere_area(d) },
        Angular::Product { coef, a } => {
            if d == 1 {
                return 2.0 * coef;
            }
            let tol = Tolerance { abs: 1e-14, rel: 1e-13, max_intervals: 2000 };
            let mut total = coef * 2f64.powi(d as i32);
            for (aj, ej) in orthant_exponents(&a) {
                total *= integrate_angle_weight(aj, ej, &tol).map(|e| e.value).unwrap_or(f64::NAN);
            }
            total
        }
    }
}

const FIRST_OCTAVE: i32 = 4;
const LAST_OCTAVE: i32 = 14;
const SLOPE_THRESHOLD: f64 = -1e-3;

/// `∫ g(|ξ|) μ(dξ)` over a radial range for a non-negative `g` with
/// `g(r) = O(r^{-g_decay})`, reporting divergence of the truncated integrals.
pub fn radial_integral(
    m: &SpectralMeasure,
    g: &dyn Fn(f64) -> f64,
    g_decay: f64,
    range: RadialRange,
    tol: f64,
) -> Result<Integral> {
    let d = m.dimension() as f64;
    let a = angular_mass(m);
    let p = m.origin_exponent() + d - 1.0;
    let t = Tolerance { abs: tol / (4.0 * a), rel: 0.0, max_intervals: 4000 };
    let h = |r: f64| m.radial_part(r) * r.powf(d - 1.0) * g(r);
    let smooth = |r: f64| m.radial_regular_part(r) * g(r);

    let (lo, hi) = match range {
        RadialRange::Full => (0.0, f64::INFINITY),
        RadialRange::Ball(r) => (0.0, r),
        RadialRange::Outside(r) => (r, f64::INFINITY),
    };
    let mut total = Estimate::ZERO;
    let mut start = lo;
    if lo == 0.0 {
        let r0 = hi.min(1.0);
        total = total.add(integrate_power_origin(&smooth, p, r0, &t)?);
        start = r0;
    }
    if hi.is_finite() {
        if hi > start {
            total = total.add(integrate(&h, start, hi, &t)?);
        }
        return Ok(Integral::Finite { value: a * total.value, error: a * total.error });
    }
    let first = 2f64.powi(FIRST_OCTAVE);
    if start < first {
        total = total.add(integrate(&h, start, first, &t)?);
        start = first;
    }
    // cumulative integrals over octaves up to the last cutoff
    let mut increments = Vec::new();
    let mut k = start.log2().floor() as i32;
    let mut lo_k = start;
    while k < LAST_OCTAVE {
        let hi_k = 2f64.powi(k + 1);
        let e = integrate(&h, lo_k, hi_k, &t.with_abs(t.abs / 16.0))?;
        total = total.add(e);
        increments.push(e.value);
        lo_k = hi_k;
        k += 1;
    }
    let slopes: Vec<f64> = increments
        .windows(2)
        .map(|w| if w[0] > 0.0 && w[1] > 0.0 { (w[1] / w[0]).log2() } else { f64::NEG_INFINITY })
        .collect();
    let last = &slopes[slopes.len().saturating_sub(3)..];
    if last.len() == 3 && last.iter().all(|&s| s > SLOPE_THRESHOLD) {
        return Ok(Integral::Divergent { cutoff: lo_k, partial: a * total.value });
    }
    let analytic = g_decay - (m.tail_exponent() + d - 1.0);
    let empirical = 1.0 - last.last().copied().unwrap_or(-1.0);
    let beta = if analytic > 1.0 { analytic } else { empirical.max(1.0 + 1e-3) };
    let tail = integrate_algebraic_tail(&h, lo_k, beta, &t.with_abs(2.0 * t.abs))?;
    total = total.add(tail);
    Ok(Integral::Finite { value: a * total.value, error: a * total.error })
}

/// Spherical average kernel `∫_{S^{d-1}} cos(r ω·v) dω` (times the constant
/// angular factor) with its large-`r` decomposition.
struct Kernel {
    value: Box<dyn Fn(f64) -> f64 + Sync>,
    components: Vec<Component>,
    from: f64,
    nu_max: f64,
}

fn radial_kernel(d: usize, phi: f64, k: f64) -> Option<Kernel> {
    if k == 0.0 {
        let c = phi * if d == 1 { 2.0 } else { sphere_area(d) };
        return Some(Kernel {
            value: Box::new(move |_| c),
            components: vec![Component::new(move |_| c, 0.0, 0.0, 0.0)],
            from: 0.0,
            nu_max: 0.0,
        });
    }
    match d {
        1 => Some(Kernel {
            value: Box::new(move |r| 2.0 * phi * (k * r).cos()),
            components: vec![Component::new(move |_| 2.0 * phi, k, 0.0, 0.0)],
            from: 0.0,
            nu_max: k,
        }),
        2 => {
            let c = 2.0 * PI * phi;
            let amp = move |r: f64, q: bool| {
                let z = k * r;
                let (p, qq) = hankel_pq(z);
                c * (2.0 / (PI * z)).sqrt() * if q { qq } else { p }
            };
            Some(Kernel {
                value: Box::new(move |r| c * bessel_j0(k * r)),
                components: vec![
                    Component::new(move |r| amp(r, false), k, -FRAC_PI_4, 0.5),
                    Component::new(move |r| amp(r, true), k, FRAC_PI_4, 0.5),
                ],
                from: 25.0 / k,
                nu_max: k,
            })
        }
        3 => {
            let c = 4.0 * PI * phi;
            Some(Kernel {
                value: Box::new(move |r| {
                    let z = k * r;
                    if z < 1e-4 {
                        c * (1.0 - z * z / 6.0)
                    } else {
                        c * z.sin() / z
                    }
                }),
                components: vec![Component::new(move |r| c / (k * r), k, -FRAC_PI_2, 1.0)],
                from: 0.0,
                nu_max: k,
            })
        }
        _ => None,
    }
}

/// `2^d ∏_j cos(r c_j)` written as `2 Σ_s cos(r |c_1 + Σ_j s_j c_j|)`.
fn orthant_cosine_kernel(c: &[f64]) -> Kernel {
    let d = c.len();
    let mut freqs = Vec::with_capacity(1 << (d - 1));
    for s in 0..(1usize << (d - 1)) {
        let mut f = c[0];
        for j in 1..d {
            f += if (s >> (j - 1)) & 1 == 0 { c[j] } else { -c[j] };
        }
        freqs.push(f.abs());
    }
    let nu_max = freqs.iter().copied().fold(0.0, f64::max);
    let cs = c.to_vec();
    let scale = 2f64.powi(d as i32);
    Kernel {
        value: Box::new(move |r| scale * cs.iter().map(|cj| (r * cj).cos()).product::<f64>()),
        components: freqs.into_iter().map(|f| Component::new(|_| 2.0, f, 0.0, 0.0)).collect(),
        from: 0.0,
        nu_max,
    }
}

/// `∫_0^∞ R(r) r^{d-1} F(r) K(r) dr`.
fn radial_oscillatory(m: &SpectralMeasure, factor: &dyn RadialFactor, kernel: &Kernel, tol: f64) -> Result<Estimate> {
    let d = m.dimension() as f64;
    let p = m.origin_exponent() + d - 1.0;
    let nu_max = factor.max_frequency() + kernel.nu_max;
    let r_c = factor.asymptotic_from().max(kernel.from).max(2.0);
    let r0 = if nu_max > 0.0 { (FRAC_PI_2 / nu_max).min(1.0) } else { 1.0 };
    let t = Tolerance { abs: tol / 4.0, rel: 0.0, max_intervals: 20_000 };

    let smooth = |r: f64| m.radial_regular_part(r) * factor.value(r) * (kernel.value)(r);
    let full = |r: f64| m.radial_part(r) * r.powf(d - 1.0) * factor.value(r) * (kernel.value)(r);
    let mut total = integrate_power_origin(&smooth, p, r0, &t)?;

    let step = if nu_max > 0.0 { PI / nu_max } else { f64::INFINITY };
    let mut breaks = vec![r0];
    let mut x = r0;
    while x < r_c {
        x = (x + step).min(2.0 * x).min(r_c);
        breaks.push(x);
        if breaks.len() > 200_000 {
            return Err(Error::BudgetExceeded { partial: total.value, error: f64::INFINITY });
        }
    }
    let t_mid = Tolerance { max_intervals: breaks.len() * 4 + 4000, ..t };
    total = total.add(integrate_breaks(&full, &breaks, &t_mid)?);

    let measure_part = Component::new(
        {
            let m = m.clone();
            move |r| m.radial_part(r) * r.powf(d - 1.0)
        },
        0.0,
        0.0,
        -(m.tail_exponent() + d - 1.0),
    );
    let mut terms = Vec::new();
    for f in factor.components() {
        for k in &kernel.components {
            for fk in f.times(k) {
                terms.push(fk);
            }
        }
    }
    let n_terms = terms.len().max(1) as f64;
    for term in terms {
        let amp = {
            let a = term.amp.clone();
            let mp = measure_part.amp.clone();
            move |r: f64| a(r) * mp(r)
        };
        let beta = term.decay + measure_part.decay;
        let e = integrate_fourier_tail(&amp, term.nu, term.phase, r_c, beta, &t.with_abs(tol / (2.0 * n_terms)))?;
        total = total.add(e);
    }
    Ok(total)
}

/// `∫ cos⟨ξ, v⟩ F(|ξ|) μ(dξ)` for a Dalang-dominated factor `F`.
pub fn cosine_transform(m: &SpectralMeasure, v: &[f64], factor: &dyn RadialFactor, tol: f64) -> Result<Estimate> {
    let d = m.dimension();
    assert_eq!(v.len(), d);
    let k = norm(v);
    match m.angular() {
        Angular::Constant(phi) if d <= 3 || k == 0.0 => {
            let kernel = radial_kernel(d, phi, k).unwrap_or_else(|| radial_kernel(1, phi * sphere_area(d) / 2.0, 0.0).unwrap());
            radial_oscillatory(m, factor, &kernel, tol)
        }
        Angular::Product { .. } if k == 0.0 => {
            let a = angular_mass(m);
            let kernel = radial_kernel(1, a / 2.0, 0.0).expect("d = 1 kernel");
            radial_oscillatory(m, factor, &kernel, tol)
        }
        angular => {
            let (coef, a) = match angular {
                Angular::Constant(c) => (c, vec![0.0; d]),
                Angular::Product { coef, a } => (coef, a),
            };
            orthant_nested(m, coef, &a, v, factor, tol)
        }
    }
}

fn orthant_nested(
    m: &SpectralMeasure,
    coef: f64,
    a: &[f64],
    v: &[f64],
    factor: &dyn RadialFactor,
    tol: f64,
) -> Result<Estimate> {
    let d = a.len();
    let exps = orthant_exponents(a);
    let mass = angular_mass(m);
    let ctx = Nested {
        m,
        exps: &exps,
        v,
        factor,
        inner_tol: tol * 2f64.powi(d as i32) / (2.0 * mass),
        outer_tol: tol / (2.0 * coef),
        failure: RefCell::new(None),
        evaluations: RefCell::new(0),
    };
    let value = ctx.level(&[]);
    if let Some(e) = ctx.failure.into_inner() {
        return Err(e);
    }
    Ok(Estimate { value: coef * value, error: tol, evaluations: ctx.evaluations.into_inner() })
}

struct Nested<'a> {
    m: &'a SpectralMeasure,
    exps: &'a [(f64, f64)],
    v: &'a [f64],
    factor: &'a dyn RadialFactor,
    inner_tol: f64,
    outer_tol: f64,
    failure: RefCell<Option<Error>>,
    evaluations: RefCell<usize>,
}

impl Nested<'_> {
    /// Integral over the remaining angles given the leading ones.
    fn level(&self, thetas: &[f64]) -> f64 {
        let d = self.v.len();
        if self.failure.borrow().is_some() {
            return 0.0;
        }
        let j = thetas.len();
        if j == d - 1 {
            let mut omega = vec![0.0; d];
            let mut sin_prod = 1.0;
            for (i, th) in thetas.iter().enumerate() {
                omega[i] = sin_prod * th.cos();
                sin_prod *= th.sin();
            }
            omega[d - 1] = sin_prod;
            let c: Vec<f64> = omega.iter().zip(self.v).map(|(w, x)| w * x).collect();
            let kernel = orthant_cosine_kernel(&c);
            return match radial_oscillatory(self.m, self.factor, &kernel, self.inner_tol) {
                Ok(e) => {
                    *self.evaluations.borrow_mut() += e.evaluations;
                    e.value
                }
                Err(e) => {
                    *self.failure.borrow_mut() = Some(e);
                    0.0
                }
            };
        }
        let (aj, ej) = self.exps[j];
        let g = |th: f64| {
            let mut next = thetas.to_vec();
            next.push(th);
            smooth_angle_factor(th, aj, ej) * self.level(&next)
        };
        let t = Tolerance { abs: self.outer_tol, rel: 1e-10, max_intervals: 400 };
        match integrate_two_sided_power(&g, 0.0, FRAC_PI_2, ej, aj, &t) {
            Ok(e) => e.value,
            Err(e) => {
                *self.failure.borrow_mut() = Some(e);
                0.0
            }
        }
    }
}
