//! Dalang's condition and the uniform integrability hypotheses on a family of measures.

use serde::Serialize;

use super::integrals::{cosine_transform, radial_integral, DalangWeight, Integral, RadialRange};
use super::SpectralMeasure;
use crate::error::{invalid, Result};

/// `∫ μ(dξ) / (1 + |ξ|²)`.
pub fn dalang_integral(m: &SpectralMeasure, tol: f64) -> Result<Integral> {
    radial_integral(m, &|r| 1.0 / (1.0 + r * r), 2.0, RadialRange::Full, tol)
}

/// `∫ μ(dξ) / (1 + |ξ|^q)`.
pub fn h1_integral(m: &SpectralMeasure, q: f64, tol: f64) -> Result<Integral> {
    check_q(q)?;
    radial_integral(m, &|r| 1.0 / (1.0 + r.powf(q)), q, RadialRange::Full, tol)
}

/// Whether the anisotropic fractional density satisfies Dalang's condition.
pub fn anisotropic_dalang_condition(h: &[f64]) -> bool {
    h.iter().sum::<f64>() > h.len() as f64 - 1.0
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("q must lie in (0, 2), got {q}")))
    }
}

/// A finite family `μ_1, …, μ_N` together with its limit `μ`.
#[derive(Debug, Clone)]
pub struct MeasureFamily {
    members: Vec<SpectralMeasure>,
    limit: SpectralMeasure,
    worst_case: Option<SpectralMeasure>,
}

impl MeasureFamily {
    pub fn new(members: Vec<SpectralMeasure>, limit: SpectralMeasure) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("a measure family needs at least one member"));
        }
        if members.iter().any(|m| m.dimension() != limit.dimension()) {
            return Err(invalid("all family members must share the limit's dimension"));
        }
        Ok(MeasureFamily { members, limit, worst_case: None })
    }

    /// Adds a measure dominating the whole (possibly infinite) family, such as
    /// the fractional density at the smallest Hurst index. It enters every
    /// supremum alongside the listed members.
    pub fn with_worst_case(mut self, m: SpectralMeasure) -> Result<Self> {
        if m.dimension() != self.limit.dimension() {
            return Err(invalid("the worst-case measure must share the limit's dimension"));
        }
        self.worst_case = Some(m);
        Ok(self)
    }

    pub fn members(&self) -> &[SpectralMeasure] {
        &self.members
    }

    pub fn limit(&self) -> &SpectralMeasure {
        &self.limit
    }

    pub fn worst_case(&self) -> Option<&SpectralMeasure> {
        self.worst_case.as_ref()
    }

    pub fn dimension(&self) -> usize {
        self.limit.dimension()
    }

    fn supremum_candidates(&self) -> impl Iterator<Item = &SpectralMeasure> {
        self.members.iter().chain(self.worst_case.iter())
    }
}

/// Smallest `q` for which `∫_{|ξ|>1} μ(dξ)/|ξ|^q` converges, for a power-law tail.
fn tail_threshold(m: &SpectralMeasure) -> f64 {
    (m.tail_exponent() + m.dimension() as f64).max(0.0)
}

/// `q = 1 + q_min / 2` where `q_min` is the largest tail threshold in the family.
pub fn default_q(fam: &MeasureFamily) -> f64 {
    let q_min = fam.supremum_candidates().map(tail_threshold).fold(0.0, f64::max);
    (1.0 + q_min / 2.0).min(1.99)
}

/// Dyadic scales `1, 1/2, …, 1/1024`.
pub fn default_h_grid() -> Vec<f64> {
    (0..=10).map(|k| 0.5f64.powi(k)).collect()
}

/// A continuous function dominated by the Dalang weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `1 / (1 + |ξ|²)`
    DalangWeight,
    /// `cos⟨ξ, v⟩ / (1 + |ξ|²)`
    CosineWeighted { v: Vec<f64> },
}

impl TestFunction {
    pub fn integrate(&self, m: &SpectralMeasure, tol: f64) -> Result<f64> {
        match self {
            TestFunction::DalangWeight => {
                let v = vec![0.0; m.dimension()];
                Ok(cosine_transform(m, &v, &DalangWeight, tol)?.value)
            }
            TestFunction::CosineWeighted { v } => {
                if v.len() != m.dimension() {
                    return Err(invalid("test-function vector has the wrong dimension"));
                }
                Ok(cosine_transform(m, v, &DalangWeight, tol)?.value)
            }
        }
    }
}

/// The pure Dalang weight plus 25 cosine-modulated weights: in one dimension
/// 25 geometric frequencies in `[0.1, 10]`; otherwise five directions times five
/// frequencies in `{1/4, 1/2, 1, 2, 4}`.
pub fn default_dictionary(d: usize) -> Vec<TestFunction> {
    let mut out = vec![TestFunction::DalangWeight];
    if d == 1 {
        for k in 0..25 {
            let f = 0.1 * 100f64.powf(k as f64 / 24.0);
            out.push(TestFunction::CosineWeighted { v: vec![f] });
        }
        return out;
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut dirs = vec![vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    dirs[0][0] = 1.0;
    dirs[1][1] = 1.0;
    dirs[2][0] = s;
    dirs[2][1] = s;
    dirs[3][0] = s;
    dirs[3][1] = -s;
    dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
    for dir in &dirs {
        for f in [0.25, 0.5, 1.0, 2.0, 4.0] {
            out.push(TestFunction::CosineWeighted { v: dir.iter().map(|x| x * f).collect() });
        }
    }
    out
}

/// `max_f |∫ f dμ_n - ∫ f dμ|` over a dictionary of test functions.
pub fn h2_distance(m_n: &SpectralMeasure, m_limit: &SpectralMeasure, dictionary: &[TestFunction], tol: f64) -> Result<f64> {
    if m_n.dimension() != m_limit.dimension() {
        return Err(invalid("measures of different dimensions cannot be compared"));
    }
    let mut worst: f64 = 0.0;
    for f in dictionary {
        let a = f.integrate(m_n, tol)?;
        let b = f.integrate(m_limit, tol)?;
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// `(max_h h^q μ(B_{1/h}), ∫_{|ξ|>1} μ(dξ)/|ξ|^q)`.
pub fn h1_characterization(m: &SpectralMeasure, q: f64, h_grid: &[f64], tol: f64) -> Result<(f64, Integral)> {
    check_q(q)?;
    if h_grid.is_empty() || h_grid.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
        return Err(invalid("the h grid must be non-empty with values in (0, 1]"));
    }
    let mut ball: f64 = 0.0;
    for &h in h_grid {
        let mass = radial_integral(m, &|_| 1.0, 0.0, RadialRange::Ball(1.0 / h), tol)?;
        ball = ball.max(h.powf(q) * mass.value().unwrap_or(f64::INFINITY));
    }
    let tail = radial_integral(m, &|r| r.powf(-q), q, RadialRange::Outside(1.0), tol)?;
    Ok((ball, tail))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Verdicts {
    pub dalang: bool,
    pub h1: bool,
    /// The last member is at least as close to the limit as every earlier one.
    pub h2: bool,
}

/// Numeric certificates behind the hypothesis verdicts of a family.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub q: f64,
    pub dalang: Vec<Integral>,
    pub h1_supremum: Integral,
    /// Index of the first member (the worst-case measure counts as index `members.len()`)
    /// whose integral diverges.
    pub h1_offending: Option<usize>,
    pub ball_constant: f64,
    pub tail_supremum: Integral,
    pub h2_distances: Vec<f64>,
    pub verdicts: Verdicts,
}

fn sup_integral(values: &[Integral]) -> (Integral, Option<usize>) {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return (values[i], Some(i));
    }
    let best = values
        .iter()
        .copied()
        .max_by(|a, b| a.value().unwrap().total_cmp(&b.value().unwrap()))
        .expect("non-empty");
    (best, None)
}

/// Evaluates Dalang's condition, (H1) at exponent `q` and the (H2) distances
/// over the default dictionary for every member of the family.
pub fn h1_check(fam: &MeasureFamily, q: f64, tol: f64) -> Result<HypothesisReport> {
    check_q(q)?;
    let candidates: Vec<&SpectralMeasure> = fam.supremum_candidates().collect();
    let dalang = fam.members.iter().map(|m| dalang_integral(m, tol)).collect::<Result<Vec<_>>>()?;
    let h1_values = candidates.iter().map(|m| h1_integral(m, q, tol)).collect::<Result<Vec<_>>>()?;
    let (h1_supremum, h1_offending) = sup_integral(&h1_values);

    let h_grid = default_h_grid();
    let mut ball_constant: f64 = 0.0;
    let mut tails = Vec::with_capacity(candidates.len());
    for m in &candidates {
        let (b, t) = h1_characterization(m, q, &h_grid, tol)?;
        ball_constant = ball_constant.max(b);
        tails.push(t);
    }
    let (tail_supremum, _) = sup_integral(&tails);

    let dalang_ok = dalang.iter().all(Integral::is_finite);
    let dictionary = default_dictionary(fam.dimension());
    let h2_distances = if dalang_ok && dalang_integral(&fam.limit, tol)?.is_finite() {
        fam.members.iter().map(|m| h2_distance(m, &fam.limit, &dictionary, tol)).collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let h2 = match h2_distances.split_last() {
        Some((last, rest)) => rest.iter().all(|d| *last <= d + 2.0 * tol),
        None => false,
    };
    Ok(HypothesisReport {
        q,
        dalang,
        h1_supremum,
        h1_offending,
        ball_constant,
        tail_supremum,
        h2_distances,
        verdicts: Verdicts { dalang: dalang_ok, h1: h1_supremum.is_finite(), h2 },
    })
}
