//! Truncated symmetric frequency lattice carrying the cell masses of a spectral measure.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::measures::{dalang_integral, radial_integral, Integral, RadialRange, SpectralMeasure};
use crate::rng::lattice_key;

/// One representative of a `{ξ, -ξ}` pair of lattice cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    /// Integer cell coordinates; the cell is centred at `coords · spacing`.
    pub coords: Vec<i64>,
    /// `μ`-centroid of the cell.
    pub xi: Vec<f64>,
    pub xi_norm: f64,
    /// `μ`-mass of the cell.
    pub weight: f64,
    /// Random-stream identifier shared by every lattice with the same spacing.
    pub key: u64,
    pub is_zero: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeLattice {
    pub dim: usize,
    pub modes: Vec<Mode>,
    pub cutoff: f64,
    pub spacing: f64,
    pub captured_fraction: f64,
}

/// Construction parameters of a [`ModeLattice`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeParams {
    /// Half-width `L` of the physical region the field is queried on.
    pub half_width: f64,
    /// Required Dalang-mass capture `1 - eps_trunc`.
    pub eps_trunc: f64,
    /// The synthesized field has period `2π / spacing ≥ 4 · aliasing · L`.
    pub aliasing: f64,
    pub max_modes: usize,
}

impl LatticeParams {
    pub fn new(half_width: f64, eps_trunc: f64) -> Self {
        LatticeParams { half_width, eps_trunc, aliasing: 2.0, max_modes: 4_000_000 }
    }

    pub fn spacing(&self) -> f64 {
        PI / (2.0 * self.half_width * self.aliasing)
    }
}

/// Lattice for `μ` on `[-L, L]^d` with Dalang-mass capture `1 - eps_trunc`.
pub fn build_lattice(m: &SpectralMeasure, half_width: f64, horizon: f64, eps_trunc: f64) -> Result<ModeLattice> {
    if !(horizon > 0.0) {
        return Err(invalid("time horizon must be positive"));
    }
    build_lattice_with(m, &LatticeParams::new(half_width, eps_trunc))
}

fn in_half_space(j: &[i64]) -> bool {
    j.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0)
}

pub fn build_lattice_with(m: &SpectralMeasure, p: &LatticeParams) -> Result<ModeLattice> {
    if !(p.half_width > 0.0) {
        return Err(invalid("domain half-width must be positive"));
    }
    if !(p.eps_trunc > 0.0 && p.eps_trunc <= 0.1) {
        return Err(invalid(format!("eps_trunc must lie in (0, 0.1], got {}", p.eps_trunc)));
    }
    if !(p.aliasing >= 1.0) {
        return Err(invalid("aliasing factor must be at least 1"));
    }
    let d = m.dimension();
    let dalang = match dalang_integral(m, 1e-3 * p.eps_trunc)? {
        Integral::Finite { value, .. } => value,
        Integral::Divergent { .. } => {
            return Err(Error::CannotCapture(format!("{} does not satisfy Dalang's condition", m.label())))
        }
    };
    let h = p.spacing();
    let budget = p.eps_trunc * dalang;
    let tol = 1e-3 * budget;
    let tail = |r: f64| -> Result<f64> {
        radial_integral(m, &|x| 1.0 / (1.0 + x * x), 2.0, RadialRange::Outside(r), tol)?
            .value()
            .ok_or_else(|| Error::CannotCapture(format!("{} has a divergent Dalang tail", m.label())))
    };

    // smallest radius whose outside Dalang mass fits the budget
    let mut hi = 8.0 * h;
    while tail(hi)? > budget {
        hi *= 2.0;
        if half_space_count(d, hi / h + 0.5 * (d as f64).sqrt()) > p.max_modes as f64 {
            return Err(Error::CannotCapture(format!(
                "more than {} modes needed for {} at eps_trunc {}",
                p.max_modes,
                m.label(),
                p.eps_trunc
            )));
        }
    }
    let mut lo = 0.5 * hi;
    if lo >= 8.0 * h && tail(lo)? <= budget {
        hi = lo;
        lo = 0.0;
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if tail(mid)? <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let radius = hi;
    let missing = tail(radius)?;

    // every cell meeting the ball of that radius
    let rho = radius / h + 0.5 * (d as f64).sqrt();
    if half_space_count(d, rho) > p.max_modes as f64 {
        return Err(Error::CannotCapture(format!("more than {} modes needed for {}", p.max_modes, m.label())));
    }
    let rho2 = rho * rho;
    let coords: Vec<Vec<i64>> = shell_coords(d, 0, rho.ceil() as i64)
        .into_iter()
        .filter(|j| (j.iter().map(|v| v * v).sum::<i64>() as f64) <= rho2)
        .collect();
    let mut cells: Vec<Mode> = coords.par_iter().map(|j| cell(m, j, h)).collect();
    let r2 = |c: &Mode| c.coords.iter().map(|v| v * v).sum::<i64>();
    cells.sort_by(|a, b| r2(a).cmp(&r2(b)).then_with(|| a.coords.cmp(&b.coords)));
    let cutoff = cells.last().map(|c| (r2(c) as f64).sqrt() * h).unwrap_or(0.0);
    let mut modes = Vec::with_capacity(cells.len() + 1);
    modes.push(cell(m, &vec![0; d], h));
    modes.extend(cells);
    let captured_fraction = (1.0 - missing / dalang).clamp(0.0, 1.0);
    Ok(ModeLattice { dim: d, modes, cutoff, spacing: h, captured_fraction })
}

/// Approximate number of half-space cells with index radius at most `rho`.
fn half_space_count(d: usize, rho: f64) -> f64 {
    let unit_ball = std::f64::consts::PI.powf(d as f64 / 2.0) / crate::special::gamma(d as f64 / 2.0 + 1.0);
    0.5 * unit_ball * rho.powi(d as i32)
}

/// Half-space cells with squared index radius in `(lo², hi²]`.
fn shell_coords(d: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut j = vec![-hi; d];
    let (lo2, hi2) = (lo * lo, hi * hi);
    loop {
        let r2: i64 = j.iter().map(|v| v * v).sum();
        if r2 > lo2 && r2 <= hi2 && in_half_space(&j) {
            out.push(j.clone());
        }
        // odometer increment
        let mut k = d;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if j[k] < hi {
                j[k] += 1;
                break;
            }
            j[k] = -hi;
        }
    }
}

fn cell(m: &SpectralMeasure, j: &[i64], h: f64) -> Mode {
    let lo: Vec<f64> = j.iter().map(|&v| (v as f64 - 0.5) * h).collect();
    let hi: Vec<f64> = j.iter().map(|&v| (v as f64 + 0.5) * h).collect();
    let cm = m.cell_moments(&lo, &hi);
    let is_zero = j.iter().all(|&v| v == 0);
    let xi = if is_zero { vec![0.0; j.len()] } else { cm.centroid };
    let xi_norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    Mode { coords: j.to_vec(), xi, xi_norm, weight: cm.mass, key: lattice_key(j), is_zero }
}

impl ModeLattice {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `Σ_k 2 w_k cos⟨ξ_k, h⟩ f(|ξ_k|)` with the zero cell counted once.
    pub fn cosine_sum(&self, lag: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let mult = if m.is_zero { 1.0 } else { 2.0 };
                let phase: f64 = m.xi.iter().zip(lag).map(|(a, b)| a * b).sum();
                mult * m.weight * phase.cos() * f(m.xi_norm)
            })
            .sum()
    }

    /// A lattice holding only the given modes (for tests and diagnostics).
    pub fn from_modes(dim: usize, spacing: f64, modes: Vec<Mode>) -> Self {
        let cutoff = modes.iter().map(|m| m.xi_norm).fold(0.0, f64::max);
        ModeLattice { dim, modes, cutoff, spacing, captured_fraction: f64::NAN }
    }
}
