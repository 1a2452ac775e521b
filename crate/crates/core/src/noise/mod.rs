//! Exact-in-law spectral sampling of the stochastic convolution
//! `v(t, x) = ∫_0^t ∫ G_{t-s}(x - y) W(ds, dy)`.
//!
//! Each lattice mode carries two independent channels (cosine and sine) whose
//! amplitudes follow the exact Gaussian transitions of the heat or wave mode
//! equation. The field is `Σ √(2w_k) [cos⟨x, ξ_k⟩ A_k + sin⟨x, ξ_k⟩ B_k] + √w_0 A_0`.

mod lattice;
mod transition;

use ndarray::Array2;
use rayon::prelude::*;

pub use lattice::{build_lattice, build_lattice_with, LatticeParams, Mode, ModeLattice};
pub use transition::{compose, heat_transition, propagate_covariance, wave_transition, CovarianceTrace, HeatTransition, WaveTransition};

use crate::error::{invalid, Result};
use crate::grid::{Field, SpaceTimeGrid};
use crate::kernels::Kind;
use crate::rng::{channel, SeedSpec, StreamKey};

/// Where the Gaussian increments come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSource {
    Gaussian(SeedSpec),
    /// Every draw is zero, so the field vanishes identically.
    Zero,
}

impl NoiseSource {
    fn normals(&self, key: StreamKey) -> [f64; 2] {
        match self {
            NoiseSource::Gaussian(s) => s.normal_pair(key),
            NoiseSource::Zero => [0.0, 0.0],
        }
    }
}

/// Mode amplitudes `a` and their time derivatives `c` (wave only) for both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub a_cos: Vec<f64>,
    pub a_sin: Vec<f64>,
    pub c_cos: Vec<f64>,
    pub c_sin: Vec<f64>,
}

impl ModeState {
    pub fn at_rest(modes: usize) -> Self {
        ModeState { t: 0.0, a_cos: vec![0.0; modes], a_sin: vec![0.0; modes], c_cos: vec![0.0; modes], c_sin: vec![0.0; modes] }
    }
}

/// Advances every heat mode by `dt` using the draws of `(sample, step)`.
pub fn step_heat(state: &mut ModeState, lattice: &ModeLattice, dt: f64, source: &NoiseSource, sample: u32, step: u32) {
    for (k, m) in lattice.modes.iter().enumerate() {
        let tr = heat_transition(m.xi_norm, dt);
        let sd = tr.variance.sqrt();
        let zc = source.normals(StreamKey { sample, mode: m.key, channel: channel::COS, step })[0];
        state.a_cos[k] = tr.decay * state.a_cos[k] + sd * zc;
        if !m.is_zero {
            let zs = source.normals(StreamKey { sample, mode: m.key, channel: channel::SIN, step })[0];
            state.a_sin[k] = tr.decay * state.a_sin[k] + sd * zs;
        }
    }
    state.t += dt;
}

/// Advances every wave mode by `dt` using the draws of `(sample, step)`.
pub fn step_wave(state: &mut ModeState, lattice: &ModeLattice, dt: f64, source: &NoiseSource, sample: u32, step: u32) {
    for (k, m) in lattice.modes.iter().enumerate() {
        let tr = wave_transition(m.xi_norm, dt);
        let [[m00, m01], [m10, m11]] = tr.matrix;
        let l = tr.chol;
        let advance = |a: &mut f64, c: &mut f64, ch: u8| {
            let z = source.normals(StreamKey { sample, mode: m.key, channel: ch, step });
            let (a0, c0) = (*a, *c);
            *a = m00 * a0 + m01 * c0 + l[0][0] * z[0];
            *c = m10 * a0 + m11 * c0 + l[1][0] * z[0] + l[1][1] * z[1];
        };
        advance(&mut state.a_cos[k], &mut state.c_cos[k], channel::COS);
        if !m.is_zero {
            advance(&mut state.a_sin[k], &mut state.c_sin[k], channel::SIN);
        }
    }
    state.t += dt;
}

/// Mode amplitudes at each requested time (rows) for every mode (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeHistory {
    pub times: Vec<f64>,
    pub cos: Array2<f64>,
    pub sin: Array2<f64>,
}

/// Runs the exact transitions from rest through the increasing `times`
/// (a leading `0` is allowed). Step `j` is the move to `times[j]`, so two
/// lattices with the same spacing and times share their random draws mode by mode.
pub fn sample_modes(kind: Kind, lattice: &ModeLattice, times: &[f64], source: &NoiseSource, sample: u32) -> Result<ModeHistory> {
    if times.windows(2).any(|w| w[1] <= w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("sampling times must be non-negative and strictly increasing"));
    }
    let n = lattice.len();
    let mut state = ModeState::at_rest(n);
    let mut cos = Array2::zeros((times.len(), n));
    let mut sin = Array2::zeros((times.len(), n));
    for (j, &t) in times.iter().enumerate() {
        let dt = t - state.t;
        if dt > 0.0 {
            match kind {
                Kind::Heat => step_heat(&mut state, lattice, dt, source, sample, j as u32),
                Kind::Wave => step_wave(&mut state, lattice, dt, source, sample, j as u32),
            }
        }
        state.t = t;
        cos.row_mut(j).assign(&ndarray::ArrayView1::from(&state.a_cos));
        sin.row_mut(j).assign(&ndarray::ArrayView1::from(&state.a_sin));
    }
    Ok(ModeHistory { times: times.to_vec(), cos, sin })
}

/// Precomputed `√(2w) cos⟨x, ξ⟩` and `√(2w) sin⟨x, ξ⟩` tables for fixed points.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    cos_table: Array2<f64>,
    sin_table: Array2<f64>,
}

impl Synthesizer {
    pub fn new(lattice: &ModeLattice, points: &[Vec<f64>]) -> Self {
        let n = lattice.len();
        let mut cos_table = Array2::zeros((n, points.len()));
        let mut sin_table = Array2::zeros((n, points.len()));
        for (k, m) in lattice.modes.iter().enumerate() {
            if m.is_zero {
                let s = m.weight.sqrt();
                cos_table.row_mut(k).fill(s);
                continue;
            }
            let s = (2.0 * m.weight).sqrt();
            for (i, x) in points.iter().enumerate() {
                let ph: f64 = m.xi.iter().zip(x).map(|(a, b)| a * b).sum();
                let (sn, cs) = ph.sin_cos();
                cos_table[[k, i]] = s * cs;
                sin_table[[k, i]] = s * sn;
            }
        }
        Synthesizer { cos_table, sin_table }
    }

    /// Field values at the synthesizer's points, one row per history time.
    pub fn synthesize(&self, h: &ModeHistory) -> Array2<f64> {
        h.cos.dot(&self.cos_table) + h.sin.dot(&self.sin_table)
    }
}

/// One sample of `v` on every node and time of `grid`.
pub fn sample_field(kind: Kind, lattice: &ModeLattice, grid: &SpaceTimeGrid, source: &NoiseSource, sample: u32) -> Result<Field> {
    if lattice.dim != grid.space.dim {
        return Err(invalid("lattice and grid dimensions differ"));
    }
    let points: Vec<Vec<f64>> = (0..grid.space.len()).map(|i| grid.space.point(i)).collect();
    let syn = Synthesizer::new(lattice, &points);
    let h = sample_modes(kind, lattice, &grid.times(), source, sample)?;
    Ok(Field { grid: *grid, values: syn.synthesize(&h) })
}

/// Samples `v` at fixed `(times, points)` for each sample index, in parallel.
pub fn sample_points(
    kind: Kind,
    lattice: &ModeLattice,
    times: &[f64],
    points: &[Vec<f64>],
    source: &NoiseSource,
    samples: std::ops::Range<u32>,
) -> Result<Vec<Array2<f64>>> {
    let syn = Synthesizer::new(lattice, points);
    samples
        .into_par_iter()
        .map(|s| Ok(syn.synthesize(&sample_modes(kind, lattice, times, source, s)?)))
        .collect()
}

/// `Cov(v(t,x), v(t',x'))` of the lattice-discretized field, in closed form.
pub fn lattice_covariance(kind: Kind, lattice: &ModeLattice, t: f64, x: &[f64], t_prime: f64, x_prime: &[f64]) -> f64 {
    let lag: Vec<f64> = x.iter().zip(x_prime).map(|(a, b)| a - b).collect();
    lattice.cosine_sum(&lag, |r| crate::covariance::time_factor(kind, t, t_prime, r))
}
