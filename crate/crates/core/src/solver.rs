//! Pathwise solver for `u = η + G ⊛ b(u)` with `η = I₀ + v`.
//!
//! The space-time convolution is discretized with cell-exact kernel weights in
//! space and the trapezoidal rule in time, and the fixed point is found by
//! Picard iteration started from `z₀ = η`.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid, SpaceTimeGrid};
use crate::kernels::{initial_term_on_grid, kernel_weights, InitialData, KernelSpec, KernelWeights, Kind, HEAT_RADIUS};
use crate::noise::{sample_field, ModeLattice, NoiseSource};
use crate::rng::{channel, SeedSpec};

/// Built-in drifts, selectable by name in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    Constant { value: f64 },
    /// `slope · x + intercept`
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// `amplitude · sin(frequency · x)`
    Sine { amplitude: f64, frequency: f64 },
}

impl Drift {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Drift::Zero => 0.0,
            Drift::Constant { value } => value,
            Drift::Linear { slope, intercept } => slope * x + intercept,
            Drift::Sine { amplitude, frequency } => amplitude * (frequency * x).sin(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Drift::Zero | Drift::Constant { .. } => 0.0,
            Drift::Linear { slope, .. } => slope.abs(),
            Drift::Sine { amplitude, frequency } => (amplitude * frequency).abs(),
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match *self {
            Drift::Zero => Some(0.0),
            Drift::Constant { value } => Some(value.abs()),
            Drift::Linear { slope, intercept } => (slope == 0.0).then_some(intercept.abs()),
            Drift::Sine { amplitude, .. } => Some(amplitude.abs()),
        }
    }
}

#[derive(Clone)]
pub enum DriftFn {
    Builtin(Drift),
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, lipschitz: f64, bound: Option<f64> },
}

impl std::fmt::Debug for DriftFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DriftFn::Builtin(d) => d.fmt(f),
            DriftFn::Custom { lipschitz, bound, .. } => {
                f.debug_struct("Custom").field("lipschitz", lipschitz).field("bound", bound).finish()
            }
        }
    }
}

/// A globally Lipschitz drift, optionally clamped to `[-m, m]`.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub drift: DriftFn,
    pub clamp: Option<f64>,
}

impl From<Drift> for DriftSpec {
    fn from(d: Drift) -> Self {
        DriftSpec { drift: DriftFn::Builtin(d), clamp: None }
    }
}

impl DriftSpec {
    pub fn zero() -> Self {
        Drift::Zero.into()
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, lipschitz: f64, bound: Option<f64>) -> Self {
        DriftSpec { drift: DriftFn::Custom { f: Arc::new(f), lipschitz, bound }, clamp: None }
    }

    fn raw(&self, x: f64) -> f64 {
        match &self.drift {
            DriftFn::Builtin(d) => d.eval(x),
            DriftFn::Custom { f, .. } => f(x),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = self.raw(x);
        match self.clamp {
            Some(m) => y.clamp(-m, m),
            None => y,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match &self.drift {
            DriftFn::Builtin(d) => d.lipschitz(),
            DriftFn::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// `sup |b|`, if finite.
    pub fn bound(&self) -> Option<f64> {
        let own = match &self.drift {
            DriftFn::Builtin(d) => d.bound(),
            DriftFn::Custom { bound, .. } => *bound,
        };
        match (own, self.clamp) {
            (Some(a), Some(m)) => Some(a.min(m)),
            (a, m) => a.or(m),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.drift, DriftFn::Builtin(Drift::Zero)) || self.clamp == Some(0.0)
    }

    /// Spot-checks the declared Lipschitz constant and bound on 512 pseudo-random pairs.
    pub fn check(&self) -> Result<()> {
        let l = self.lipschitz();
        if !(l >= 0.0 && l.is_finite()) {
            return Err(invalid("drift Lipschitz constant must be finite and non-negative"));
        }
        if let Some(m) = self.clamp {
            if !(m >= 0.0) {
                return Err(invalid("drift truncation level must be non-negative"));
            }
        }
        let mut s = SeedSpec::new(0x0d1f_7c4e).stream(0, 0, channel::AUXILIARY);
        for i in 0..512 {
            let scale = [1.0, 10.0, 100.0][i % 3];
            let x = scale * (2.0 * s.next_uniform() - 1.0);
            let y = x + scale * 1e-2 * (2.0 * s.next_uniform() - 1.0);
            let (bx, by) = (self.eval(x), self.eval(y));
            if !bx.is_finite() {
                return Err(invalid(format!("drift is not finite at {x}")));
            }
            if (bx - by).abs() > l * (x - y).abs() * (1.0 + 1e-9) + 1e-12 {
                return Err(invalid(format!("drift violates the Lipschitz constant {l} near {x}")));
            }
            if let Some(m) = self.bound() {
                if bx.abs() > m * (1.0 + 1e-12) {
                    return Err(invalid(format!("drift exceeds its bound {m} at {x}")));
                }
            }
        }
        Ok(())
    }
}

/// `b_m = clamp(b, -m, m)`; the Lipschitz constant is unchanged.
pub fn truncate_drift(b: &DriftSpec, m: f64) -> Result<DriftSpec> {
    if !(m > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    let clamp = Some(b.clamp.map_or(m, |c| c.min(m)));
    Ok(DriftSpec { drift: b.drift.clone(), clamp })
}

/// Equation, data and the grid the solution is reported on.
#[derive(Debug, Clone)]
pub struct EquationSpec {
    pub kernel: KernelSpec,
    pub drift: DriftSpec,
    pub data: InitialData,
    /// Report grid on `[-L, L]^d`; the horizon is `steps · dt`.
    pub grid: SpaceTimeGrid,
}

impl EquationSpec {
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Every violation of the solver's hypotheses, or empty.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let d = self.kernel.dim;
        if self.grid.space.dim != d {
            v.push(format!("grid dimension {} differs from kernel dimension {d}", self.grid.space.dim));
        }
        if let Err(e) = self.drift.check() {
            v.push(e.to_string());
        }
        if let Err(e) = self.data.check(self.kernel) {
            v.push(e.to_string());
        }
        if !self.drift.is_zero() {
            match self.kernel.kind {
                Kind::Wave if d != 1 => v.push(format!("nonlinear wave equation is only supported in dimension 1, got {d}")),
                Kind::Heat if d > 2 => v.push(format!("nonlinear heat equation is only supported in dimensions 1 and 2, got {d}")),
                _ => {}
            }
            if self.kernel.kind == Kind::Heat && self.drift.bound().is_none() && self.data.u0.smoothness().holder_exponent().is_none()
            {
                v.push("heat equation with unbounded drift needs Hölder continuous u0".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }

    /// Spatial padding needed around the report region.
    pub fn padding(&self) -> f64 {
        let t = self.horizon();
        if self.drift.is_zero() {
            return 0.0;
        }
        match self.kernel.kind {
            Kind::Wave => t,
            Kind::Heat => HEAT_RADIUS * t.sqrt(),
        }
    }

    /// Grid on which `η` is needed: the report region plus [`EquationSpec::padding`].
    pub fn padded_grid(&self) -> Result<SpaceTimeGrid> {
        let g = self.grid.space;
        let space = Grid::covering(g.dim, g.dx, g.half_width() + self.padding())?;
        SpaceTimeGrid::new(self.grid.dt, self.grid.steps, space)
    }
}

/// Closed-form Gronwall bounds for Picard increments.
///
/// Wave: `λ₁ Σ_{j<k} (λ₂t²)^j/j! + f₀ (λ₂t²)^k/k!`.
/// Heat: `f₀` at `k = 0`, otherwise `2 b_bound C_b^{k-1} (λ₂t)^k/k! + λ₁ Σ_{j<k} t^j/j!`.
#[allow(clippy::too_many_arguments)]
pub fn gronwall_envelope(kind: Kind, lambda1: f64, lambda2: f64, f0_sup: f64, b_bound: f64, lipschitz: f64, t: f64, k: usize) -> f64 {
    match kind {
        Kind::Wave => {
            let x = lambda2 * t * t;
            let mut term = 1.0;
            let mut sum = 0.0;
            for j in 0..k {
                sum += term;
                term *= x / (j + 1) as f64;
            }
            lambda1 * sum + f0_sup * term
        }
        Kind::Heat => {
            if k == 0 {
                return f0_sup;
            }
            let mut power = 1.0;
            let mut sum = 0.0;
            for j in 0..k {
                sum += power;
                power *= t / (j + 1) as f64;
            }
            // power = t^k / k!
            2.0 * b_bound * lipschitz.powi(k as i32 - 1) * lambda2.powi(k as i32) * power + lambda1 * sum
        }
    }
}

/// `C` with `‖F(η₁) - F(η₂)‖_∞ ≤ C ‖η₁ - η₂‖_∞` on `[0, T]`.
pub fn continuity_constant(kind: Kind, lipschitz: f64, horizon: f64) -> f64 {
    match kind {
        Kind::Wave => (lipschitz * horizon * horizon).exp(),
        Kind::Heat => (lipschitz * horizon).exp(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    /// `‖z_{k+1} - z_k‖_∞` for every iteration performed.
    pub increments: Vec<f64>,
    /// `‖z - η - K[b(z)]‖_∞` of the returned iterate.
    pub residual: f64,
    /// Gronwall bound for each increment.
    pub envelope: Vec<f64>,
    /// `increments[k] ≤ 1.1 · envelope[k]` up to round-off, for every `k`.
    pub envelope_respected: bool,
    /// `max |b(z)|` over every iterate and grid value.
    pub max_abs_drift: f64,
    /// The continuum integral equation is not known to be well-posed (heat with unbounded drift).
    pub continuum_caveat: bool,
}

/// Discrete operator `f ↦ K[f]` on a fixed grid.
struct Convolution {
    kind: Kind,
    grid: SpaceTimeGrid,
    /// Stencils by time lag `i - j`, lag 0 excluded.
    stencils: Vec<(Vec<Vec<i64>>, Vec<f64>)>,
    coords: Vec<Vec<i64>>,
}

impl Convolution {
    fn new(kernel: KernelSpec, grid: SpaceTimeGrid) -> Result<Self> {
        let mut stencils = Vec::with_capacity(grid.steps + 1);
        stencils.push((Vec::new(), Vec::new()));
        for lag in 1..=grid.steps {
            match kernel_weights(kernel, lag as f64 * grid.dt, &grid.space)? {
                KernelWeights::Stencil { offsets, weights } => stencils.push((offsets, weights)),
                KernelWeights::Points { .. } => {
                    return Err(Error::UnsupportedKernel("nonlinear solver needs grid stencils".into()))
                }
            }
        }
        let coords = (0..grid.space.len()).map(|i| grid.space.index_coords(i)).collect();
        Ok(Convolution { kind: kernel.kind, grid, stencils, coords })
    }

    /// Trapezoidal rule in time; the `s = t` endpoint is the identity for heat and zero for wave.
    fn apply(&self, f: &Array2<f64>) -> Array2<f64> {
        let dt = self.grid.dt;
        let g = &self.grid.space;
        let rows: Vec<Vec<f64>> = (1..=self.grid.steps)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; g.len()];
                let mut c = vec![0i64; g.dim];
                for (node, x) in self.coords.iter().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..i {
                        let w_time = if j == 0 { 0.5 * dt } else { dt };
                        let (offs, ws) = &self.stencils[i - j];
                        let mut s = 0.0;
                        for (o, w) in offs.iter().zip(ws) {
                            for k in 0..g.dim {
                                c[k] = x[k] - o[k];
                            }
                            s += w * f[[j, g.clamped_index(&c)]];
                        }
                        acc += w_time * s;
                    }
                    if self.kind == Kind::Heat {
                        acc += 0.5 * dt * f[[i, node]];
                    }
                    row[node] = acc;
                }
                row
            })
            .collect();
        let mut out = Array2::zeros(f.raw_dim());
        for (i, row) in rows.into_iter().enumerate() {
            out.row_mut(i + 1).assign(&ndarray::Array1::from(row));
        }
        out
    }
}

fn sup_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves `z = η + K[b(z)]` on `η`'s grid.
pub fn picard_solve(spec: &EquationSpec, eta: &Field, tol: f64, max_iter: usize) -> Result<(Field, PicardReport)> {
    spec.validate()?;
    let t = eta.grid.horizon();
    let caveat = spec.kernel.kind == Kind::Heat && spec.drift.bound().is_none() && !spec.drift.is_zero();
    if spec.drift.is_zero() {
        let report = PicardReport {
            iterations: 1,
            increments: vec![0.0],
            residual: 0.0,
            envelope: vec![0.0],
            envelope_respected: true,
            max_abs_drift: 0.0,
            continuum_caveat: false,
        };
        return Ok((eta.clone(), report));
    }
    if eta.grid.space.dim != spec.kernel.dim {
        return Err(invalid("η and kernel dimensions differ"));
    }
    if spec.kernel.kind == Kind::Wave {
        let need = spec.grid.space.half_width() + t;
        if eta.grid.space.half_width() < need - 1e-9 * eta.grid.space.dx {
            return Err(Error::ConeViolation(format!(
                "η covers [-{}, {}] but the light cone needs [-{need}, {need}]",
                eta.grid.space.half_width(),
                eta.grid.space.half_width()
            )));
        }
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("Picard tolerance must be positive and at least one iteration allowed"));
    }
    let conv = Convolution::new(spec.kernel, eta.grid)?;
    let b = &spec.drift;
    let mut max_abs_drift: f64 = 0.0;
    let mut step = |z: &Array2<f64>| -> Array2<f64> {
        let bz = z.mapv(|v| b.eval(v));
        max_abs_drift = bz.iter().fold(max_abs_drift, |m, v| m.max(v.abs()));
        let k = conv.apply(&bz);
        let mut next = eta.values.clone();
        next.zip_mut_with(&k, |a, c| {
            if *c != 0.0 {
                *a += c
            }
        });
        next
    };

    let mut z = eta.values.clone();
    let mut next = step(&z);
    let mut increments = Vec::new();
    let result = loop {
        let inc = sup_diff(&next, &z);
        increments.push(inc);
        if inc <= tol {
            let after = step(&next);
            let residual = sup_diff(&after, &next);
            if residual <= tol {
                break Some((next, residual));
            }
            z = next;
            next = after;
        } else {
            z = next;
            next = step(&z);
        }
        if increments.len() >= max_iter {
            break None;
        }
    };
    let Some((z, residual)) = result else {
        return Err(Error::NoConvergence { iterations: increments.len(), residual: *increments.last().unwrap() });
    };

    let lip = b.lipschitz();
    let d0 = increments[0];
    let envelope: Vec<f64> = (0..increments.len())
        .map(|k| match spec.kernel.kind {
            Kind::Wave => gronwall_envelope(Kind::Wave, 0.0, lip, d0, 0.0, lip, t, k),
            Kind::Heat => {
                let b_bound = b.bound().map_or(0.5 * lip * d0, |m| m.min(0.5 * lip * d0));
                gronwall_envelope(Kind::Heat, 0.0, 1.0, d0, b_bound, lip, t, k)
            }
        })
        .collect();
    let scale = eta.values.iter().chain(z.iter()).fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    let envelope_respected = increments.iter().zip(&envelope).all(|(d, e)| *d <= 1.1 * e + floor);
    let report = PicardReport {
        iterations: increments.len(),
        increments,
        residual,
        envelope,
        envelope_respected,
        max_abs_drift,
        continuum_caveat: caveat,
    };
    Ok((Field { grid: eta.grid, values: z }, report))
}

/// `η = I₀ + v` on the padded grid.
pub fn assemble_eta(spec: &EquationSpec, lattice: &ModeLattice, source: &NoiseSource, sample: u32) -> Result<Field> {
    let grid = spec.padded_grid()?;
    let period = std::f64::consts::TAU / lattice.spacing;
    if period < 4.0 * grid.space.half_width() {
        return Err(invalid(format!(
            "lattice period {period} is too short for the padded half-width {}",
            grid.space.half_width()
        )));
    }
    let mut eta = sample_field(spec.kernel.kind, lattice, &grid, source, sample)?;
    if !(spec.data.u0.is_zero() && spec.data.v0.is_zero()) {
        for (i, t) in grid.times().into_iter().enumerate() {
            let init = initial_term_on_grid(spec.kernel, &spec.data, t, &grid.space)?;
            for (v, a) in eta.values.row_mut(i).iter_mut().zip(init) {
                *v += a;
            }
        }
    }
    Ok(eta)
}

/// One sample of the solution on the report grid.
#[derive(Debug, Clone)]
pub struct Solution {
    pub field: Field,
    pub report: PicardReport,
}

pub fn solve_spde(
    spec: &EquationSpec,
    lattice: &ModeLattice,
    source: &NoiseSource,
    sample: u32,
    tol: f64,
    max_iter: usize,
) -> Result<Solution> {
    spec.validate()?;
    let eta = assemble_eta(spec, lattice, source, sample)?;
    let (z, report) = picard_solve(spec, &eta, tol, max_iter)?;
    Ok(Solution { field: z.restrict(spec.grid.space.half_width()), report })
}
