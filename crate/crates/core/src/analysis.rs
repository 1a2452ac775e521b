//! Ensemble statistics: increment moments, Hölder fits, the
//! Garsia-Rodemich-Rumsey modulus and two-sample energy distances.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::Field;
use crate::kernels::Kind;
use crate::rng::{channel, SeedSpec};
use crate::special::gamma;

pub const MIN_SAMPLES: usize = 30;

/// Independent samples of one random field on a common grid.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub label: String,
    pub seed: u64,
    pub fields: Vec<Field>,
}

impl Ensemble {
    pub fn new(label: impl Into<String>, seed: u64, fields: Vec<Field>) -> Result<Self> {
        if let Some(f) = fields.first() {
            if fields.iter().any(|g| g.grid != f.grid) {
                return Err(invalid("ensemble fields must share one grid"));
            }
        }
        Ok(Ensemble { label: label.into(), seed, fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Which increments to average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `X(t_row, x + lag·dx·e_axis) - X(t_row, x)` over all admissible `x`.
    Space { row: usize, axis: usize },
    /// `X(t_row + lag·dt, x) - X(t_row, x)` over all nodes.
    Time { row: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentTable {
    pub direction: Direction,
    /// Physical lags.
    pub lags: Vec<f64>,
    pub p: f64,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: usize,
}

/// Mean and jackknife standard error of per-sample statistics.
pub fn jackknife_mean(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let total: f64 = y.iter().sum();
    let mean = total / n;
    if y.len() < 2 {
        return (mean, 0.0);
    }
    let var: f64 = y.iter().map(|v| ((total - v) / (n - 1.0) - mean).powi(2)).sum();
    (mean, ((n - 1.0) / n * var).sqrt())
}

/// `E|ΔX|^p` for each lag (in grid units), with jackknife standard errors.
pub fn increment_moments(e: &Ensemble, direction: Direction, lags: &[usize], p: f64) -> Result<MomentTable> {
    if e.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { got: e.len(), needed: MIN_SAMPLES });
    }
    if !(p > 0.0) {
        return Err(invalid("moment order must be positive"));
    }
    let grid = e.fields[0].grid;
    let g = grid.space;
    let mut phys = Vec::with_capacity(lags.len());
    let mut estimates = Vec::with_capacity(lags.len());
    let mut std_errors = Vec::with_capacity(lags.len());
    for &lag in lags {
        if lag == 0 {
            return Err(invalid("lags must be positive"));
        }
        let pairs: Vec<(usize, usize, usize, usize)> = match direction {
            Direction::Space { row, axis } => {
                if row > grid.steps || axis >= g.dim || lag >= g.nodes_per_axis() {
                    return Err(invalid(format!("space lag {lag} is not representable on the grid")));
                }
                (0..g.len())
                    .filter_map(|i| {
                        let mut c = g.index_coords(i);
                        c[axis] += lag as i64;
                        g.index(&c).map(|j| (row, i, row, j))
                    })
                    .collect()
            }
            Direction::Time { row } => {
                if row + lag > grid.steps {
                    return Err(invalid(format!("time lag {lag} from row {row} exceeds the grid")));
                }
                (0..g.len()).map(|i| (row, i, row + lag, i)).collect()
            }
        };
        let per_sample: Vec<f64> = e
            .fields
            .iter()
            .map(|f| {
                pairs.iter().map(|&(r0, i, r1, j)| (f.at(r1, j) - f.at(r0, i)).abs().powf(p)).sum::<f64>() / pairs.len() as f64
            })
            .collect();
        let (m, se) = jackknife_mean(&per_sample);
        phys.push(lag as f64 * if matches!(direction, Direction::Time { .. }) { grid.dt } else { g.dx });
        estimates.push(m);
        std_errors.push(se);
    }
    Ok(MomentTable { direction, lags: phys, p, estimates, std_errors, samples: e.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(log h, log E|Δ|^p)` on the lag indices in `window`.
pub fn holder_fit(tab: &MomentTable, window: std::ops::Range<usize>) -> Result<HolderFit> {
    if window.end > tab.lags.len() || window.len() < 4 {
        return Err(invalid("a Hölder fit needs at least 4 lags inside the table"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in window {
        if !(tab.estimates[i] > 0.0) {
            return Err(invalid(format!("moment estimate at lag {} is not positive", tab.lags[i])));
        }
        xs.push(tab.lags[i].ln());
        ys.push(tab.estimates[i].ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(HolderFit { slope, intercept: my - slope * mx, r_squared })
}

/// Exponent `e` in the second-moment bound `E|Δ|² ≤ C h^e` under (H1) with exponent `q`.
pub fn second_moment_exponent(kind: Kind, direction: Direction, q: f64) -> f64 {
    match (kind, direction) {
        (Kind::Heat, Direction::Time { .. }) => 1.0 - q / 2.0,
        _ => 2.0 - q,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformityReport {
    pub lags: Vec<f64>,
    pub exponent: f64,
    /// `ratios[n][l] = estimate / h_l^{exponent·p/2}` for member `n`.
    pub ratios: Vec<Vec<f64>>,
    /// Largest ratio over members at each lag.
    pub max_ratios: Vec<f64>,
    /// `max / min` of `max_ratios` over lags.
    pub spread: f64,
    pub bounded: bool,
}

/// Normalized moments across a family; bounded when the spread over lags is at most 10.
pub fn uniformity_report(tables: &[MomentTable], exponent: f64) -> Result<UniformityReport> {
    let first = tables.first().ok_or_else(|| invalid("uniformity needs at least one table"))?;
    if tables.iter().any(|t| t.lags != first.lags || t.p != first.p || t.samples != first.samples) {
        return Err(invalid("tables must share lags, moment order and sample count"));
    }
    let power = exponent * first.p / 2.0;
    let ratios: Vec<Vec<f64>> =
        tables.iter().map(|t| t.estimates.iter().zip(&t.lags).map(|(e, h)| e / h.powf(power)).collect()).collect();
    let max_ratios: Vec<f64> =
        (0..first.lags.len()).map(|l| ratios.iter().map(|r| r[l]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let hi = max_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = max_ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    Ok(UniformityReport { lags: first.lags.clone(), exponent, ratios, max_ratios, spread, bounded: spread <= 10.0 })
}

/// `ψ(x) = |x|^γ`, `p(u) = u^{(k+2m)/γ}` on an `m`-dimensional rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrrParams {
    pub gamma: f64,
    pub m: usize,
    pub k: f64,
}

impl GrrParams {
    pub fn new(gamma: f64, m: usize, k: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !(k > 0.0) || m == 0 {
            return Err(invalid("GRR parameters need gamma ≥ 1, k > 0 and m ≥ 1"));
        }
        Ok(GrrParams { gamma, m, k })
    }

    /// `C_m` with `vol(B(x, u/2) ∩ R) ≥ C_m u^m` for `u` up to twice the shortest side.
    pub fn ball_constant(&self) -> f64 {
        let m = self.m as f64;
        let unit_ball = PI.powf(m / 2.0) / gamma(m / 2.0 + 1.0);
        unit_ball / 4f64.powf(m)
    }

    fn p(&self, u: f64) -> f64 {
        u.powf((self.k + 2.0 * self.m as f64) / self.gamma)
    }
}

/// Samples of a function on a rectangle: values, node positions and cell volumes.
#[derive(Debug, Clone)]
pub struct RectangleSample {
    pub values: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub volumes: Vec<f64>,
    /// Shortest side of the rectangle.
    pub min_side: f64,
}

impl RectangleSample {
    /// The spatial slice of `field` at time row `row`, restricted to `[-half_width, half_width]^d`.
    pub fn from_slice(field: &Field, row: usize, half_width: f64) -> Self {
        let f = field.restrict(half_width);
        let g = f.grid.space;
        let n = g.half_nodes as i64;
        let mut values = Vec::with_capacity(g.len());
        let mut points = Vec::with_capacity(g.len());
        let mut volumes = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let c = g.index_coords(i);
            values.push(f.at(row, i));
            points.push(g.point(i));
            volumes.push(c.iter().map(|&v| if v.abs() == n && n > 0 { 0.5 * g.dx } else { g.dx }).product());
        }
        RectangleSample { values, points, volumes, min_side: 2.0 * g.half_width() }
    }

    /// Space-time rectangle `[0, T] × [-half_width, half_width]^d` built from every grid value.
    pub fn from_space_time(field: &Field, half_width: f64) -> Self {
        let f = field.restrict(half_width);
        let g = f.grid.space;
        let n = g.half_nodes as i64;
        let steps = f.grid.steps;
        let mut s = RectangleSample { values: Vec::new(), points: Vec::new(), volumes: Vec::new(), min_side: 0.0 };
        for r in 0..=steps {
            let wt = if r == 0 || r == steps { 0.5 * f.grid.dt } else { f.grid.dt };
            for i in 0..g.len() {
                let c = g.index_coords(i);
                let mut p = vec![r as f64 * f.grid.dt];
                p.extend(g.point(i));
                s.values.push(f.at(r, i));
                s.points.push(p);
                s.volumes.push(wt * c.iter().map(|&v| if v.abs() == n && n > 0 { 0.5 * g.dx } else { g.dx }).product::<f64>());
            }
        }
        s.min_side = (2.0 * g.half_width()).min(f.grid.horizon());
        s
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.points[i].iter().zip(&self.points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Riemann sum of `∬ ψ((f(x) - f(y)) / p(|x - y|)) dx dy`, diagonal cells excluded.
pub fn grr_gamma(s: &RectangleSample, params: &GrrParams) -> f64 {
    let n = s.values.len();
    let expo = params.k + 2.0 * params.m as f64;
    // ψ(Δ/p(r)) = |Δ|^γ / r^{k+2m}
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in i + 1..n {
                let diff = (s.values[i] - s.values[j]).abs();
                if diff == 0.0 {
                    continue;
                }
                acc += diff.powf(params.gamma) / s.distance(i, j).powf(expo) * s.volumes[j];
            }
            acc * s.volumes[i]
        })
        .collect();
    2.0 * rows.iter().sum::<f64>()
}

/// Right side of the GRR modulus bound at distance `r`.
pub fn grr_bound(params: &GrrParams, gamma_value: f64, r: f64, min_side: f64) -> f64 {
    let (g, k, m) = (params.gamma, params.k, params.m as f64);
    let cm = params.ball_constant();
    let scale = (gamma_value / (cm * cm)).powf(1.0 / g);
    let (u, cap) = (2.0 * r, 2.0 * min_side);
    if u <= cap {
        8.0 * (k + 2.0 * m) / k * scale * u.powf(k / g)
    } else {
        // beyond the corner estimate the ball volume is bounded below by its value at the cap
        let near = (k + 2.0 * m) / k * cap.powf(k / g);
        let far = cap.powf(-2.0 * m / g) * (params.p(u) - params.p(cap));
        8.0 * scale * (near + far)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusCheck {
    pub holds: bool,
    pub max_ratio: f64,
}

/// `max |f(x) - f(y)| / bound(|x - y|)` over all node pairs; holds when at most 1.05.
pub fn grr_modulus_check(s: &RectangleSample, params: &GrrParams, gamma_value: f64) -> Result<ModulusCheck> {
    if !(gamma_value >= 0.0) {
        return Err(invalid("Γ must be non-negative"));
    }
    let n = s.values.len();
    let max_ratio = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in i + 1..n {
                let diff = (s.values[i] - s.values[j]).abs();
                if diff == 0.0 {
                    continue;
                }
                let b = grr_bound(params, gamma_value, s.distance(i, j), s.min_side);
                worst = worst.max(if b > 0.0 { diff / b } else { f64::INFINITY });
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    Ok(ModulusCheck { holds: max_ratio <= 1.05, max_ratio })
}

/// Pairwise Euclidean distances of the pooled observations.
pub fn distance_matrix(obs: &[Vec<f64>]) -> Array2<f64> {
    let n = obs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| obs.iter().map(|o| o.iter().zip(&obs[i]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect())
        .collect();
    Array2::from_shape_vec((n, n), rows.concat()).expect("square matrix")
}

fn quadratic_statistic(d: &Array2<f64>, labels: &[bool], n: usize, m: usize) -> f64 {
    let a = Array1::from_iter(labels.iter().map(|&x| if x { 1.0 / n as f64 } else { -1.0 / m as f64 }));
    -a.dot(&d.dot(&a))
}

/// V-statistic energy distance `2E|X-Y| - E|X-X'| - E|Y-Y'|`.
pub fn energy_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("energy distance needs two non-empty samples"));
    }
    let pooled: Vec<Vec<f64>> = x.iter().chain(y).cloned().collect();
    let labels: Vec<bool> = (0..pooled.len()).map(|i| i < x.len()).collect();
    Ok(quadratic_statistic(&distance_matrix(&pooled), &labels, x.len(), y.len()))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTest {
    pub statistic: f64,
    /// 95% quantile of the permutation distribution.
    pub null_quantile_95: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub within_null_band: bool,
}

/// Energy distance with a permutation null band; permutations are drawn from `seed`.
pub fn energy_test(x: &[Vec<f64>], y: &[Vec<f64>], permutations: usize, seed: SeedSpec) -> Result<EnergyTest> {
    if x.len() < MIN_SAMPLES || y.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { got: x.len().min(y.len()), needed: MIN_SAMPLES });
    }
    let pooled: Vec<Vec<f64>> = x.iter().chain(y).cloned().collect();
    let d = distance_matrix(&pooled);
    let (n, m) = (x.len(), y.len());
    let labels: Vec<bool> = (0..n + m).map(|i| i < n).collect();
    let statistic = quadratic_statistic(&d, &labels, n, m);
    let mut null: Vec<f64> = (0..permutations as u32)
        .into_par_iter()
        .map(|k| {
            let mut l = labels.clone();
            let mut s = seed.stream(k, 0, channel::PERMUTATION);
            for i in (1..l.len()).rev() {
                l.swap(i, s.below(i + 1));
            }
            quadratic_statistic(&d, &l, n, m)
        })
        .collect();
    null.sort_by(f64::total_cmp);
    let q = null[((0.95 * permutations as f64).ceil() as usize).clamp(1, permutations) - 1];
    let exceed = null.iter().filter(|&&v| v >= statistic).count();
    Ok(EnergyTest {
        statistic,
        null_quantile_95: q,
        p_value: (1 + exceed) as f64 / (1 + permutations) as f64,
        permutations,
        within_null_band: statistic <= q,
    })
}

/// `true` when every entry is below its predecessor.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakConvergenceReport {
    pub members: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_distances: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniformity: Option<UniformityReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub energy: Vec<EnergyTest>,
    pub covariance_decreasing: Option<bool>,
    pub energy_decreasing: Option<bool>,
    pub final_within_null_band: Option<bool>,
}

/// Collects the per-member diagnostics and their monotone-trend summary.
pub fn weak_convergence_report(
    members: Vec<String>,
    covariance_distances: Option<Vec<f64>>,
    uniformity: Option<UniformityReport>,
    energy: Vec<EnergyTest>,
) -> WeakConvergenceReport {
    let covariance_decreasing = covariance_distances.as_deref().map(strictly_decreasing);
    let stats: Vec<f64> = energy.iter().map(|e| e.statistic).collect();
    let energy_decreasing = (!energy.is_empty()).then(|| strictly_decreasing(&stats));
    let final_within_null_band = energy.last().map(|e| e.within_null_band);
    WeakConvergenceReport {
        members,
        covariance_distances,
        uniformity,
        energy,
        covariance_decreasing,
        energy_decreasing,
        final_within_null_band,
    }
}
