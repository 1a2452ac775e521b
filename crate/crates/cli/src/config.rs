//! Experiment configuration: TOML schema, invariant checks and construction of library objects.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use spdelab::analysis::{GrrParams, MIN_SAMPLES};
use spdelab::covariance::Pair;
use spdelab::grid::{Grid, SpaceTimeGrid};
use spdelab::kernels::{InitialData, KernelSpec, Kind, Profile};
use spdelab::measures::{MeasureFamily, RadialProfile, SpectralMeasure};
use spdelab::noise::{build_lattice_with, LatticeParams, ModeLattice};
use spdelab::solver::{Drift, DriftSpec, EquationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    MeasureCheck,
    SimulateLinear,
    Solve,
    Converge,
    Regularity,
    Grr,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::MeasureCheck => "measure-check",
            Experiment::SimulateLinear => "simulate-linear",
            Experiment::Solve => "solve",
            Experiment::Converge => "converge",
            Experiment::Regularity => "regularity",
            Experiment::Grr => "grr",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub measure: Option<MeasureConfig>,
    pub family: Option<FamilyConfig>,
    pub equation: Option<EquationConfig>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureConfig {
    FractionalLine { h: f64 },
    Anisotropic { h: Vec<f64> },
    Riesz { dim: usize, alpha: f64 },
    Isotropic { dim: usize, h: f64 },
    /// Radial density through `(r, density)` knots with power-law decay beyond the last knot.
    Tabulated { dim: usize, r: Vec<f64>, density: Vec<f64>, decay: f64 },
}

impl MeasureConfig {
    pub fn build(&self) -> spdelab::Result<SpectralMeasure> {
        match self {
            MeasureConfig::FractionalLine { h } => SpectralMeasure::fractional_line(*h),
            MeasureConfig::Anisotropic { h } => SpectralMeasure::anisotropic(h.clone()),
            MeasureConfig::Riesz { dim, alpha } => SpectralMeasure::riesz(*dim, *alpha),
            MeasureConfig::Isotropic { dim, h } => SpectralMeasure::isotropic(*dim, *h),
            MeasureConfig::Tabulated { dim, r, density, decay } => {
                SpectralMeasure::tabulated(*dim, RadialProfile::from_table(r, density, *decay)?)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub members: Vec<MeasureConfig>,
    pub limit: MeasureConfig,
    pub worst_case: Option<MeasureConfig>,
}

fn zero_profile() -> Profile {
    Profile::Constant { value: 0.0 }
}

fn zero_drift() -> Drift {
    Drift::Zero
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationConfig {
    pub kind: Kind,
    pub dim: usize,
    /// Time horizon `T`; must be a whole number of steps `dt`.
    pub horizon: f64,
    /// Reported region `[-L, L]^d`.
    pub half_width: f64,
    pub dt: f64,
    pub dx: f64,
    #[serde(default = "zero_drift")]
    pub drift: Drift,
    /// Clamp level `m` for the truncated drift.
    pub clamp: Option<f64>,
    #[serde(default = "zero_profile")]
    pub u0: Profile,
    #[serde(default = "zero_profile")]
    pub v0: Profile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub eps_trunc: f64,
    pub aliasing: f64,
    pub max_modes: usize,
    /// Region the lattice must resolve; defaults to the padded solver region.
    pub half_width: Option<f64>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig { eps_trunc: 0.01, aliasing: 2.0, max_modes: 4_000_000, half_width: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub samples: u32,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { samples: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrrConfig {
    pub gamma: f64,
    pub k: f64,
    /// Use the whole space-time rectangle instead of the final time slice.
    pub space_time: bool,
}

impl Default for GrrConfig {
    fn default() -> Self {
        GrrConfig { gamma: 8.0, k: 1.0, space_time: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Increment lags in grid steps.
    pub lags: Vec<usize>,
    pub p: f64,
    /// (H1) exponent; the family default when absent.
    pub q: Option<f64>,
    /// Quadrature tolerance.
    pub tol: f64,
    pub pairs: Vec<Pair>,
    /// Observation points `[t, x1, .., xd]` for energy distances; snapped to the grid.
    pub points: Vec<Vec<f64>>,
    pub permutations: usize,
    pub grr: GrrConfig,
    pub picard_tol: f64,
    pub max_iter: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lags: vec![1, 2, 4, 8, 16],
            p: 2.0,
            q: None,
            tol: 1e-6,
            pairs: Vec::new(),
            points: Vec::new(),
            permutations: 1000,
            grr: GrrConfig::default(),
            picard_tol: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Skip `fields.bin` when false.
    pub fields: Option<bool>,
}

/// A checked configuration with every library object it needs.
#[derive(Debug)]
pub struct Prepared {
    pub config: Config,
    /// The measure of single-measure experiments, or the family members.
    pub measures: Vec<SpectralMeasure>,
    pub family: Option<MeasureFamily>,
    pub equation: Option<EquationSpec>,
    /// One lattice per entry of `measures`, plus the limit's last for nonlinear convergence runs.
    pub lattices: Vec<ModeLattice>,
    /// Observation points as `(row, node)` grid indices.
    pub points: Vec<(usize, usize)>,
}

impl Prepared {
    pub fn equation(&self) -> &EquationSpec {
        self.equation.as_ref().expect("checked during preparation")
    }
}

pub fn parse(text: &str) -> Result<Config, Vec<String>> {
    toml::from_str(text).map_err(|e| vec![e.to_string().trim_end().to_string()])
}

fn equation_spec(e: &EquationConfig, v: &mut Vec<String>) -> Option<EquationSpec> {
    let mut ok = true;
    let mut need = |cond: bool, msg: &str| {
        if !cond {
            v.push(format!("equation: {msg}"));
            ok = false;
        }
    };
    need(e.horizon > 0.0, "horizon must be positive");
    need(e.dt > 0.0, "dt must be positive");
    need(e.dx > 0.0, "dx must be positive");
    need(e.half_width >= 0.0, "half_width must be non-negative");
    need((1..=3).contains(&e.dim), "dim must be 1, 2 or 3");
    if !ok {
        return None;
    }
    let steps = (e.horizon / e.dt).round();
    if steps < 1.0 || (steps * e.dt - e.horizon).abs() > 1e-9 * e.horizon {
        v.push("equation: horizon must be a whole number of dt steps".into());
        return None;
    }
    for (name, p) in [("u0", &e.u0), ("v0", &e.v0)] {
        if let Err(err) = p.validate() {
            v.push(format!("equation.{name}: {err}"));
            return None;
        }
    }
    let kernel = match KernelSpec::new(e.kind, e.dim) {
        Ok(k) => k,
        Err(err) => {
            v.push(format!("equation: {err}"));
            return None;
        }
    };
    let mut drift: DriftSpec = e.drift.into();
    if let Some(m) = e.clamp {
        match spdelab::solver::truncate_drift(&drift, m) {
            Ok(d) => drift = d,
            Err(err) => {
                v.push(format!("equation.clamp: {err}"));
                return None;
            }
        }
    }
    let grid = match Grid::covering(e.dim, e.dx, e.half_width).and_then(|g| SpaceTimeGrid::new(e.dt, steps as usize, g)) {
        Ok(g) => g,
        Err(err) => {
            v.push(format!("equation: {err}"));
            return None;
        }
    };
    let spec = EquationSpec { kernel, drift, data: InitialData::new(e.u0.clone(), e.v0.clone()), grid };
    let before = v.len();
    v.extend(spec.violations().into_iter().map(|s| format!("equation: {s}")));
    (v.len() == before).then_some(spec)
}

fn build_measure(m: &MeasureConfig, field: &str, v: &mut Vec<String>) -> Option<SpectralMeasure> {
    m.build().map_err(|e| v.push(format!("{field}: {e}"))).ok()
}

/// Every violation of the schema invariants, or the prepared experiment.
pub fn prepare(config: Config) -> Result<Prepared, Vec<String>> {
    use Experiment::*;
    let mut v = Vec::new();
    let exp = config.experiment;
    let a = &config.analysis;

    let mut family = None;
    let mut measures = Vec::new();
    match (&config.measure, &config.family) {
        (Some(_), Some(_)) => v.push("give either [measure] or [family], not both".into()),
        (None, None) => v.push(format!("{} needs a [measure] or [family] block", exp.name())),
        (Some(m), None) => {
            if exp == Converge {
                v.push("converge needs a [family] block".into());
            }
            if let Some(m) = build_measure(m, "measure", &mut v) {
                measures.push(m);
            }
        }
        (None, Some(f)) => {
            if matches!(exp, SimulateLinear | Solve | Grr) {
                v.push(format!("{} runs a single [measure]", exp.name()));
            }
            if f.members.is_empty() {
                v.push("family.members must not be empty".into());
            }
            let members: Vec<Option<SpectralMeasure>> =
                f.members.iter().enumerate().map(|(i, m)| build_measure(m, &format!("family.members[{i}]"), &mut v)).collect();
            let limit = build_measure(&f.limit, "family.limit", &mut v);
            let worst = f.worst_case.as_ref().map(|m| build_measure(m, "family.worst_case", &mut v));
            if let (Some(members), Some(limit)) = (members.into_iter().collect::<Option<Vec<_>>>(), limit) {
                measures = members.clone();
                match MeasureFamily::new(members, limit) {
                    Ok(fam) => match worst {
                        Some(Some(w)) => match fam.with_worst_case(w) {
                            Ok(fam) => family = Some(fam),
                            Err(e) => v.push(format!("family: {e}")),
                        },
                        Some(None) => {}
                        None => family = Some(fam),
                    },
                    Err(e) => v.push(format!("family: {e}")),
                }
            }
        }
    }
    if let Some(q) = a.q {
        if !(q > 0.0 && q < 2.0) {
            v.push("analysis.q must lie in (0, 2)".into());
        }
    }
    if !(a.tol > 0.0) {
        v.push("analysis.tol must be positive".into());
    }
    let dim = measures.first().map(SpectralMeasure::dimension);

    let equation = match (&config.equation, exp) {
        (None, MeasureCheck) => None,
        (None, _) => {
            v.push(format!("{} needs an [equation] block", exp.name()));
            None
        }
        (Some(e), _) => {
            if let Some(d) = dim {
                if e.dim != d {
                    v.push(format!("equation.dim = {} differs from the measure dimension {d}", e.dim));
                }
            }
            equation_spec(e, &mut v)
        }
    };
    if exp == SimulateLinear && config.equation.as_ref().is_some_and(|e| !matches!(e.drift, Drift::Zero)) {
        v.push("simulate-linear needs drift = { name = \"zero\" }; use solve for nonlinear equations".into());
    }

    let samples = config.ensemble.samples;
    let nonlinear = equation.as_ref().is_some_and(|s| !s.drift.is_zero());
    match exp {
        SimulateLinear | Solve | Grr if samples == 0 => v.push("ensemble.samples must be at least 1".into()),
        Regularity if (samples as usize) < MIN_SAMPLES => {
            v.push(format!("ensemble.samples must be at least {MIN_SAMPLES} for moment estimates"))
        }
        Converge if nonlinear && (samples as usize) < MIN_SAMPLES => {
            v.push(format!("ensemble.samples must be at least {MIN_SAMPLES} for energy distances"))
        }
        _ => {}
    }
    if !(a.picard_tol > 0.0) || a.max_iter == 0 {
        v.push("analysis.picard_tol must be positive and analysis.max_iter at least 1".into());
    }

    if let Some(d) = dim {
        for (i, p) in a.pairs.iter().enumerate() {
            if p.x.len() != d || p.x_prime.len() != d {
                v.push(format!("analysis.pairs[{i}]: points must have {d} coordinates"));
            }
            if !(p.t >= 0.0 && p.t_prime >= 0.0) {
                v.push(format!("analysis.pairs[{i}]: times must be non-negative"));
            }
        }
    }
    if exp == Converge && a.pairs.is_empty() {
        v.push("converge needs at least one entry in analysis.pairs".into());
    }

    let mut points = Vec::new();
    if let Some(spec) = &equation {
        let g = spec.grid;
        let steps = g.steps;
        if exp == Converge && nonlinear {
            if a.points.is_empty() {
                v.push("nonlinear converge needs observation points in analysis.points".into());
            }
            if a.permutations < 20 {
                v.push("analysis.permutations must be at least 20".into());
            }
            for (i, p) in a.points.iter().enumerate() {
                if p.len() != g.space.dim + 1 {
                    v.push(format!("analysis.points[{i}]: expected [t, x1..x{}]", g.space.dim));
                    continue;
                }
                let row = (p[0] / g.dt).round();
                let coords: Vec<i64> = p[1..].iter().map(|x| (x / g.space.dx).round() as i64).collect();
                match (row >= 0.0 && row <= steps as f64, g.space.index(&coords)) {
                    (true, Some(node)) => points.push((row as usize, node)),
                    _ => v.push(format!("analysis.points[{i}] lies outside the report grid")),
                }
            }
        }
        if exp == Regularity {
            let max_lag = a.lags.iter().copied().max().unwrap_or(0);
            if a.lags.is_empty() || a.lags.contains(&0) {
                v.push("analysis.lags must be non-empty and positive".into());
            } else if max_lag > steps || max_lag > 2 * g.space.half_nodes {
                v.push(format!("analysis.lags: largest lag {max_lag} does not fit the grid ({steps} steps, {} nodes per axis)", g.space.nodes_per_axis()));
            }
            if !(a.p >= 1.0) {
                v.push("analysis.p must be at least 1".into());
            }
        }
        if exp == Grr {
            if let Err(e) = GrrParams::new(a.grr.gamma, g.space.dim + a.grr.space_time as usize, a.grr.k) {
                v.push(format!("analysis.grr: {e}"));
            }
            if g.space.half_nodes == 0 {
                v.push("grr needs at least three nodes per axis".into());
            }
        }
    }

    let lat = &config.lattice;
    if !(lat.eps_trunc > 0.0 && lat.eps_trunc < 1.0) {
        v.push("lattice.eps_trunc must lie in (0, 1)".into());
    }
    if !(lat.aliasing >= 1.0) {
        v.push("lattice.aliasing must be at least 1".into());
    }
    if lat.half_width.is_some_and(|h| !(h > 0.0)) {
        v.push("lattice.half_width must be positive".into());
    }

    let mut lattices = Vec::new();
    let needs_lattice = match exp {
        MeasureCheck => false,
        Converge => nonlinear,
        _ => true,
    };
    if v.is_empty() && needs_lattice {
        let spec = equation.as_ref().expect("present when valid");
        let padded = spec.padded_grid().map(|g| g.space.half_width()).unwrap_or(spec.grid.space.half_width());
        let half_width = lat.half_width.unwrap_or(padded).max(padded).max(spec.grid.space.dx);
        let params = LatticeParams { half_width, eps_trunc: lat.eps_trunc, aliasing: lat.aliasing, max_modes: lat.max_modes };
        let mut targets: Vec<&SpectralMeasure> = measures.iter().collect();
        if exp == Converge {
            targets.push(family.as_ref().expect("present when valid").limit());
        }
        for m in targets {
            match build_lattice_with(m, &params) {
                Ok(l) => lattices.push(l),
                Err(e) => v.push(format!("lattice for {}: {e}", m.label())),
            }
        }
    }

    if v.is_empty() {
        Ok(Prepared { config, measures, family, equation, lattices, points })
    } else {
        Err(v)
    }
}
