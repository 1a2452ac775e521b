//! Fundamental solutions of the heat and wave operators, their discrete
//! quadrature weights, and the contribution of the initial data.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quadrature::{integrate, Tolerance};
use crate::special::{gauss_legendre, gaussian_interval_mass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Heat,
    Wave,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Heat => "heat",
            Kind::Wave => "wave",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: Kind,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(kind: Kind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedKernel("dimension must be at least 1".into()));
        }
        if kind == Kind::Wave && dim > 3 {
            return Err(Error::UnsupportedKernel(format!("no wave kernel in dimension {dim}")));
        }
        Ok(KernelSpec { kind, dim })
    }

    pub fn heat(dim: usize) -> Result<Self> {
        KernelSpec::new(Kind::Heat, dim)
    }

    pub fn wave(dim: usize) -> Result<Self> {
        KernelSpec::new(Kind::Wave, dim)
    }
}

/// `FG_t(ξ)`: `exp(-t|ξ|²/2)` for heat, `sin(t|ξ|)/|ξ|` for wave.
pub fn fourier_g(kind: Kind, t: f64, xi_norm: f64) -> f64 {
    match kind {
        Kind::Heat => (-0.5 * t * xi_norm * xi_norm).exp(),
        Kind::Wave => {
            let z = t * xi_norm;
            if z.abs() < 1e-4 {
                t * (1.0 - z * z / 6.0)
            } else {
                (z).sin() / xi_norm
            }
        }
    }
}

/// `∫ G_t(dx)`: 1 for heat, `t` for wave.
pub fn kernel_mass(kind: Kind, t: f64) -> f64 {
    match kind {
        Kind::Heat => 1.0,
        Kind::Wave => t,
    }
}

/// Number of standard deviations kept by the heat weights.
pub const HEAT_RADIUS: f64 = 6.0;

/// Discrete version of `G_t` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelWeights {
    /// Weights attached to integer node offsets.
    Stencil { offsets: Vec<Vec<i64>>, weights: Vec<f64> },
    /// Weights attached to arbitrary displacement vectors.
    Points { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

impl KernelWeights {
    pub fn weights(&self) -> &[f64] {
        match self {
            KernelWeights::Stencil { weights, .. } | KernelWeights::Points { weights, .. } => weights,
        }
    }

    pub fn total(&self) -> f64 {
        self.weights().iter().sum()
    }
}

/// Cell-integrated kernel weights at time `t > 0` for grid spacing `grid.dx`.
///
/// Heat uses products of Gaussian cell masses out to six standard deviations;
/// wave in one dimension integrates `½ 1{|x| < t}` exactly over each cell; wave in
/// three dimensions is a product Gauss-Legendre × trapezoid rule on the sphere of
/// radius `t` with total mass `t`.
pub fn kernel_weights(k: KernelSpec, t: f64, grid: &Grid) -> Result<KernelWeights> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel weights need t > 0, got {t}")));
    }
    let dx = grid.dx;
    match (k.kind, k.dim) {
        (Kind::Heat, d) => {
            let sigma = t.sqrt();
            let n = (HEAT_RADIUS * sigma / dx).ceil() as i64;
            let axis: Vec<f64> = (-n..=n)
                .map(|i| gaussian_interval_mass((i as f64 - 0.5) * dx, (i as f64 + 0.5) * dx, t))
                .collect();
            Ok(tensor_stencil(&axis, n, d))
        }
        (Kind::Wave, 1) => {
            let n = (t / dx + 0.5).ceil() as i64;
            let axis: Vec<f64> = (-n..=n)
                .map(|i| {
                    let lo = ((i as f64 - 0.5) * dx).max(-t);
                    let hi = ((i as f64 + 0.5) * dx).min(t);
                    0.5 * (hi - lo).max(0.0)
                })
                .collect();
            Ok(tensor_stencil(&axis, n, 1))
        }
        (Kind::Wave, 3) => {
            let (points, weights) = sphere_rule(t, 16);
            Ok(KernelWeights::Points { points, weights: weights.iter().map(|w| w * t).collect() })
        }
        (Kind::Wave, d) => Err(Error::UnsupportedKernel(format!("no discrete wave weights in dimension {d}"))),
    }
}

fn tensor_stencil(axis: &[f64], n: i64, d: usize) -> KernelWeights {
    let m = axis.len();
    let count = m.pow(d as u32);
    let mut offsets = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for idx in 0..count {
        let mut rest = idx;
        let mut off = vec![0i64; d];
        let mut w = 1.0;
        for j in (0..d).rev() {
            let a = rest % m;
            rest /= m;
            off[j] = a as i64 - n;
            w *= axis[a];
        }
        if w > 0.0 {
            offsets.push(off);
            weights.push(w);
        }
    }
    KernelWeights::Stencil { offsets, weights }
}

/// Points and probability weights of the uniform measure on the sphere of radius `r` in R^3:
/// Gauss-Legendre in `cos θ` with `n` nodes, trapezoid in `φ` with `2n` nodes.
pub fn sphere_rule(r: f64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mut pts = Vec::with_capacity(2 * n * n);
    let mut wts = Vec::with_capacity(2 * n * n);
    for (c, wc) in x.iter().zip(&w) {
        let s = (1.0 - c * c).sqrt();
        for j in 0..2 * n {
            let phi = PI * j as f64 / n as f64;
            pts.push(vec![r * s * phi.cos(), r * s * phi.sin(), r * c]);
            wts.push(0.5 * wc / (2 * n) as f64);
        }
    }
    (pts, wts)
}

/// Regularity class of an initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", content = "alpha", rename_all = "lowercase")]
pub enum Smoothness {
    Bounded,
    Holder(f64),
    /// Continuously differentiable with bounded gradient.
    C1,
}

impl Smoothness {
    /// Hölder exponent implied by the class, if any.
    pub fn holder_exponent(&self) -> Option<f64> {
        match self {
            Smoothness::Bounded => None,
            Smoothness::Holder(a) => Some(*a),
            Smoothness::C1 => Some(1.0),
        }
    }
}

/// Built-in initial profiles; non-radial ones depend on the first coordinate only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// `amplitude · sin(frequency · x₁)`
    Sine { amplitude: f64, frequency: f64 },
    /// `slope · x₁` clipped to `[-clip, clip]`
    ClippedLinear { slope: f64, clip: f64 },
    /// `height · exp(1 - 1/(1 - |x|²/radius²))` inside the ball, zero outside
    Bump { height: f64, radius: f64 },
    /// `amplitude · Σ_{k<terms} 2^{-kα} cos(2^k x₁)`
    Weierstrass { alpha: f64, amplitude: f64, terms: usize },
    /// `height` for `x₁ ≥ at`, zero below; bounded but not continuous
    Step { height: f64, at: f64 },
}

impl Profile {
    pub fn smoothness(&self) -> Smoothness {
        match self {
            Profile::Constant { .. } | Profile::Sine { .. } | Profile::Bump { .. } => Smoothness::C1,
            Profile::ClippedLinear { .. } => Smoothness::Holder(1.0),
            Profile::Weierstrass { alpha, .. } => Smoothness::Holder(*alpha),
            Profile::Step { .. } => Smoothness::Bounded,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInitialData(m.to_string()));
        match self {
            Profile::ClippedLinear { clip, .. } if !(*clip > 0.0) => bad("clip must be positive"),
            Profile::Bump { radius, .. } if !(*radius > 0.0) => bad("bump radius must be positive"),
            Profile::Weierstrass { alpha, terms, .. } if !(*alpha > 0.0 && *alpha <= 1.0) || *terms == 0 => {
                bad("Weierstrass profile needs alpha in (0, 1] and at least one term")
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Sine { amplitude, frequency } => amplitude * (frequency * x[0]).sin(),
            Profile::ClippedLinear { slope, clip } => (slope * x[0]).clamp(-clip, *clip),
            Profile::Bump { height, radius } => {
                let s = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
                if s < 1.0 {
                    height * (1.0 - 1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Profile::Weierstrass { alpha, amplitude, terms } => {
                let mut s = 0.0;
                for k in 0..*terms {
                    let f = 2f64.powi(k as i32);
                    s += f.powf(-alpha) * (f * x[0]).cos();
                }
                amplitude * s
            }
            Profile::Step { height, at } => {
                if x[0] >= *at {
                    *height
                } else {
                    0.0
                }
            }
        }
    }

    /// Gradient where it exists (the clipped ramp uses its one-sided slope at the kinks).
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            Profile::Constant { .. } | Profile::Step { .. } => {}
            Profile::Sine { amplitude, frequency } => g[0] = amplitude * frequency * (frequency * x[0]).cos(),
            Profile::ClippedLinear { slope, clip } => {
                if (slope * x[0]).abs() < *clip {
                    g[0] = *slope;
                }
            }
            Profile::Bump { height, radius } => {
                let r2 = radius * radius;
                let s = x.iter().map(|v| v * v).sum::<f64>() / r2;
                if s < 1.0 {
                    let u = 1.0 - s;
                    let val = height * (1.0 - 1.0 / u).exp();
                    for (gj, xj) in g.iter_mut().zip(x) {
                        *gj = -val * 2.0 * xj / (r2 * u * u);
                    }
                }
            }
            Profile::Weierstrass { alpha, amplitude, terms } => {
                for k in 0..*terms {
                    let f = 2f64.powi(k as i32);
                    g[0] -= amplitude * f.powf(1.0 - alpha) * (f * x[0]).sin();
                }
            }
        }
        g
    }

    /// `sup |u|`.
    pub fn sup(&self) -> f64 {
        match self {
            Profile::Constant { value } => value.abs(),
            Profile::Sine { amplitude, .. } => amplitude.abs(),
            Profile::ClippedLinear { clip, .. } => *clip,
            Profile::Bump { height, .. } => height.abs(),
            Profile::Weierstrass { alpha, amplitude, terms } => {
                amplitude.abs() * (0..*terms).map(|k| 2f64.powf(-alpha * k as f64)).sum::<f64>()
            }
            Profile::Step { height, .. } => height.abs(),
        }
    }

    /// `sup |∇u|`.
    pub fn gradient_sup(&self) -> f64 {
        match self {
            Profile::Constant { .. } => 0.0,
            // the jump has no bounded gradient
            Profile::Step { .. } => f64::INFINITY,
            Profile::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
            Profile::ClippedLinear { slope, .. } => slope.abs(),
            // max of |d/ds e^{1-1/(1-s²)}| on [0,1) is below 2.2 / radius
            Profile::Bump { height, radius } => 2.2 * height.abs() / radius,
            Profile::Weierstrass { alpha, amplitude, terms } => {
                amplitude.abs() * (0..*terms).map(|k| 2f64.powf((1.0 - alpha) * k as f64)).sum::<f64>()
            }
        }
    }
}

/// A datum given either by a built-in profile or by user functions.
#[derive(Clone)]
pub enum DataFn {
    Builtin(Profile),
    Custom {
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        gradient: Option<Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>>,
        smoothness: Smoothness,
    },
}

impl std::fmt::Debug for DataFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataFn::Builtin(p) => p.fmt(f),
            DataFn::Custom { smoothness, .. } => f.debug_struct("Custom").field("smoothness", smoothness).finish(),
        }
    }
}

impl From<Profile> for DataFn {
    fn from(p: Profile) -> Self {
        DataFn::Builtin(p)
    }
}

impl DataFn {
    pub fn zero() -> Self {
        DataFn::Builtin(Profile::Constant { value: 0.0 })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            DataFn::Builtin(p) => p.eval(x),
            DataFn::Custom { f, .. } => f(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            DataFn::Builtin(p) => Some(p.gradient(x)),
            DataFn::Custom { gradient, .. } => gradient.as_ref().map(|g| g(x)),
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match self {
            DataFn::Builtin(p) => p.smoothness(),
            DataFn::Custom { smoothness, .. } => *smoothness,
        }
    }

    /// Identically zero built-in constant.
    pub fn is_zero(&self) -> bool {
        matches!(self, DataFn::Builtin(Profile::Constant { value }) if *value == 0.0)
    }
}

/// Initial position `u0` and (wave only) velocity `v0`.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: DataFn,
    pub v0: DataFn,
}

impl InitialData {
    pub fn new(u0: impl Into<DataFn>, v0: impl Into<DataFn>) -> Self {
        InitialData { u0: u0.into(), v0: v0.into() }
    }

    pub fn zero() -> Self {
        InitialData { u0: DataFn::zero(), v0: DataFn::zero() }
    }

    /// Checks the regularity the initial-data term needs for the given kernel.
    pub fn check(&self, k: KernelSpec) -> Result<()> {
        for d in [&self.u0, &self.v0] {
            if let DataFn::Builtin(p) = d {
                p.validate()?;
            }
        }
        if k.kind == Kind::Wave && k.dim >= 2 {
            if self.u0.smoothness() != Smoothness::C1 || self.u0.gradient(&vec![0.0; k.dim]).is_none() {
                return Err(Error::InvalidInitialData(format!(
                    "the wave equation in dimension {} needs a C1 initial position with bounded gradient",
                    k.dim
                )));
            }
        }
        Ok(())
    }
}

/// Standard normal quadrature: 16 Gauss-Legendre panels of 10 nodes on `[-8, 8]`.
fn normal_rule() -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(10);
    let mut z = Vec::with_capacity(160);
    let mut w = Vec::with_capacity(160);
    let norm = 1.0 / TAU.sqrt();
    for p in 0..16 {
        let (a, b) = (-8.0 + p as f64, -7.0 + p as f64);
        for (x, wx) in gx.iter().zip(&gw) {
            let zz = 0.5 * (a + b) + 0.5 * (b - a) * x;
            z.push(zz);
            w.push(0.5 * (b - a) * wx * norm * (-0.5 * zz * zz).exp());
        }
    }
    (z, w)
}

/// `I₀(t, x)`: the solution of the homogeneous equation with the given data.
pub fn initial_term(k: KernelSpec, data: &InitialData, t: f64, x: &[f64]) -> Result<f64> {
    data.check(k)?;
    if x.len() != k.dim {
        return Err(Error::InvalidParameter("point dimension does not match the kernel".into()));
    }
    if t == 0.0 {
        return Ok(data.u0.eval(x));
    }
    match (k.kind, k.dim) {
        (Kind::Heat, d) => {
            let (z, w) = normal_rule();
            let s = t.sqrt();
            let n = z.len();
            let mut y = vec![0.0; d];
            let mut total = 0.0;
            for idx in 0..n.pow(d as u32) {
                let mut rest = idx;
                let mut weight = 1.0;
                for j in 0..d {
                    let a = rest % n;
                    rest /= n;
                    y[j] = x[j] + s * z[a];
                    weight *= w[a];
                }
                total += weight * data.u0.eval(&y);
            }
            Ok(total)
        }
        (Kind::Wave, 1) => {
            let x0 = x[0];
            let mean = 0.5 * (data.u0.eval(&[x0 + t]) + data.u0.eval(&[x0 - t]));
            if data.v0.is_zero() {
                return Ok(mean);
            }
            let v = |y: f64| data.v0.eval(&[y]);
            let e = integrate(&v, x0 - t, x0 + t, &Tolerance { abs: 1e-12, rel: 1e-12, max_intervals: 2000 })?;
            Ok(mean + 0.5 * e.value)
        }
        (Kind::Wave, 2) => {
            // y = x + t sin φ ω: the weight 1/√(t²-|y-x|²) ρ dρ becomes t sin φ dφ
            let (gx, gw) = gauss_legendre(24);
            let n_theta = 48;
            let mut total = 0.0;
            for (p, wp) in gx.iter().zip(&gw) {
                let phi = 0.25 * PI * (p + 1.0);
                let rho = t * phi.sin();
                let mut ring = 0.0;
                for j in 0..n_theta {
                    let th = TAU * j as f64 / n_theta as f64;
                    let (s, c) = th.sin_cos();
                    let y = [x[0] + rho * c, x[1] + rho * s];
                    let g = data.u0.gradient(&y).expect("checked above");
                    ring += data.u0.eval(&y) + t * data.v0.eval(&y) + g[0] * rho * c + g[1] * rho * s;
                }
                total += 0.25 * PI * wp * phi.sin() * ring / n_theta as f64;
            }
            Ok(total)
        }
        (Kind::Wave, 3) => {
            let (pts, wts) = sphere_rule(t, 16);
            let mut total = 0.0;
            for (p, w) in pts.iter().zip(&wts) {
                let y = [x[0] + p[0], x[1] + p[1], x[2] + p[2]];
                let g = data.u0.gradient(&y).expect("checked above");
                total += w * (t * data.v0.eval(&y) + data.u0.eval(&y) + g[0] * p[0] + g[1] * p[1] + g[2] * p[2]);
            }
            Ok(total)
        }
        (Kind::Wave, d) => Err(Error::UnsupportedKernel(format!("no wave kernel in dimension {d}"))),
    }
}

/// `I₀(t, ·)` at every node of `grid`. Heat uses the grid kernel weights (so the
/// discrete solution operator is consistent with the drift convolution).
pub fn initial_term_on_grid(k: KernelSpec, data: &InitialData, t: f64, grid: &Grid) -> Result<Vec<f64>> {
    data.check(k)?;
    if let DataFn::Builtin(Profile::Constant { value }) = data.u0 {
        if data.v0.is_zero() {
            return Ok(vec![value; grid.len()]);
        }
    }
    if t == 0.0 {
        return Ok((0..grid.len()).map(|i| data.u0.eval(&grid.point(i))).collect());
    }
    match k.kind {
        Kind::Heat => {
            let KernelWeights::Stencil { offsets, weights } = kernel_weights(k, t, grid)? else {
                unreachable!("heat weights are a stencil")
            };
            let mut out = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let c = grid.index_coords(i);
                let mut s = 0.0;
                for (o, w) in offsets.iter().zip(&weights) {
                    let y: Vec<f64> = c.iter().zip(o).map(|(a, b)| (a + b) as f64 * grid.dx).collect();
                    s += w * data.u0.eval(&y);
                }
                out.push(s);
            }
            Ok(out)
        }
        Kind::Wave => (0..grid.len()).map(|i| initial_term(k, data, t, &grid.point(i))).collect(),
    }
}
