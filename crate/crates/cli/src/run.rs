//! Experiment runners; each writes its CSV artifacts and returns the report.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use spdelab::analysis::*;
use spdelab::covariance::{covariance, covariance_distance, Pair};
use spdelab::grid::Field;
use spdelab::kernels::Kind;
use spdelab::measures::{default_q, h1_check, Integral, MeasureFamily, SpectralMeasure};
use spdelab::noise::{lattice_covariance, sample_points, ModeLattice, NoiseSource};
use spdelab::rng::SeedSpec;
use spdelab::solver::{solve_spde, Solution};

use crate::config::{Experiment, Prepared};

/// Report plus the verdict failures that turn into exit code 2.
pub struct Outcome {
    pub report: Value,
    pub failures: Vec<String>,
}

/// Output directory that remembers every file written.
pub struct Sink {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Sink { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<File> {
        self.files.push(name.to_string());
        let path = self.dir.join(name);
        File::create(&path).with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        use std::io::Write;
        writeln!(f)?;
        Ok(())
    }

    fn fields(&mut self, fields: &[Field], seed: u64) -> Result<()> {
        let mut f = std::io::BufWriter::new(self.create("fields.bin")?);
        for field in fields {
            field.write_binary(&mut f, seed)?;
        }
        Ok(())
    }

    fn field_csv(&mut self, name: &str, field: &Field) -> Result<()> {
        field.write_csv(self.create(name)?)?;
        Ok(())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn integral(v: &Integral) -> String {
    v.value().map_or_else(|| "divergent".into(), num)
}

pub fn run(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    match p.config.experiment {
        Experiment::MeasureCheck => measure_check(p, sink),
        Experiment::SimulateLinear => simulate_linear(p, sink),
        Experiment::Solve => solve(p, sink),
        Experiment::Converge => converge(p, sink),
        Experiment::Regularity => regularity(p, sink),
        Experiment::Grr => grr(p, sink),
    }
}

fn family_of(p: &Prepared) -> Result<MeasureFamily> {
    match &p.family {
        Some(f) => Ok(f.clone()),
        None => Ok(MeasureFamily::new(p.measures.clone(), p.measures[0].clone())?),
    }
}

fn source(p: &Prepared) -> NoiseSource {
    NoiseSource::Gaussian(SeedSpec::new(p.config.seed))
}

fn solutions(p: &Prepared, lattice: &ModeLattice, src: &NoiseSource, samples: u32) -> Result<Vec<Solution>> {
    let spec = p.equation();
    let a = &p.config.analysis;
    Ok((0..samples).into_par_iter().map(|s| solve_spde(spec, lattice, src, s, a.picard_tol, a.max_iter)).collect::<spdelab::Result<_>>()?)
}

fn lattice_summary(l: &ModeLattice) -> Value {
    json!({ "modes": l.len(), "spacing": l.spacing, "cutoff": l.cutoff, "captured_fraction": l.captured_fraction })
}

fn measure_check(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let fam = family_of(p)?;
    let a = &p.config.analysis;
    let q = a.q.unwrap_or_else(|| default_q(&fam));
    let rep = h1_check(&fam, q, a.tol)?;
    let rows = fam.members().iter().zip(&rep.dalang).enumerate().map(|(i, (m, d))| vec![i.to_string(), m.label(), integral(d)]).collect();
    sink.csv("dalang.csv", &["member".into(), "label".into(), "dalang".into()], rows)?;
    if !rep.h2_distances.is_empty() {
        let rows = rep.h2_distances.iter().enumerate().map(|(i, d)| vec![i.to_string(), fam.members()[i].label(), num(*d)]).collect();
        sink.csv("h2.csv", &["member".into(), "label".into(), "distance".into()], rows)?;
    }
    let mut failures = Vec::new();
    if !rep.verdicts.dalang {
        failures.push("Dalang's condition fails".into());
    }
    if !rep.verdicts.h1 {
        failures.push(format!("(H1) fails at q = {q}"));
    }
    if p.family.is_some() && !rep.verdicts.h2 {
        failures.push("(H2) trend fails: the last member is not the closest to the limit".into());
    }
    Ok(Outcome { report: serde_json::to_value(&rep)?, failures })
}

fn point_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn simulate_linear(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let spec = p.equation();
    let (m, lat) = (&p.measures[0], &p.lattices[0]);
    let kind = spec.kernel.kind;
    let a = &p.config.analysis;
    let src = source(p);
    let samples = p.config.ensemble.samples;
    let fields: Vec<Field> = solutions(p, lat, &src, samples)?.into_iter().map(|s| s.field).collect();

    let g = spec.grid;
    let d = g.space.dim;
    let center = g.space.index(&vec![0; d]).expect("grid contains the origin");
    let origin = vec![0.0; d];
    let times = g.times();
    let oracle_pairs: Vec<Pair> = times.iter().map(|&t| Pair::new(t, origin.clone(), t, origin.clone())).collect();
    let oracle = covariance(kind, m, &oracle_pairs, a.tol)?;
    let mut rows = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let vals: Vec<f64> = fields.iter().map(|f| f.at(i, center)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sq: Vec<f64> = vals.iter().map(|v| (v - mean).powi(2)).collect();
        let (var, se) = mean_se(&sq);
        rows.push(vec![num(t), num(var), num(se), num(lattice_covariance(kind, lat, t, &origin, t, &origin)), num(oracle[i])]);
    }
    let header: Vec<String> = ["t", "mc_variance", "mc_se", "lattice_variance", "oracle_variance"].iter().map(|s| s.to_string()).collect();
    sink.csv("variance.csv", &header, rows)?;

    let mut worst_se = None;
    if !a.pairs.is_empty() {
        let mut ts: Vec<f64> = a.pairs.iter().flat_map(|q| [q.t, q.t_prime]).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let pts: Vec<Vec<f64>> = a.pairs.iter().flat_map(|q| [q.x.clone(), q.x_prime.clone()]).collect();
        let runs = sample_points(kind, lat, &ts, &pts, &src, 0..samples)?;
        let exact = covariance(kind, m, &a.pairs, a.tol)?;
        let row = |t: f64| ts.iter().position(|&s| s == t).expect("collected above");
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for (k, q) in a.pairs.iter().enumerate() {
            let (i, j) = (row(q.t), row(q.t_prime));
            let prod: Vec<f64> = runs.iter().map(|r| r[[i, 2 * k]] * r[[j, 2 * k + 1]]).collect();
            let (mc, se) = mean_se(&prod);
            if se > 0.0 {
                worst = worst.max((mc - exact[k]).abs() / se);
            }
            let mut r = vec![num(q.t)];
            r.extend(q.x.iter().copied().map(num));
            r.push(num(q.t_prime));
            r.extend(q.x_prime.iter().copied().map(num));
            r.extend([exact[k], lattice_covariance(kind, lat, q.t, &q.x, q.t_prime, &q.x_prime), mc, se].map(num));
            rows.push(r);
        }
        let mut header = vec!["t".to_string()];
        header.extend(point_header("x", d));
        header.push("t_prime".into());
        header.extend(point_header("x_prime", d));
        header.extend(["oracle", "lattice", "mc", "mc_se"].map(String::from));
        sink.csv("covariance.csv", &header, rows)?;
        worst_se = Some(worst);
    }
    if p.config.output.fields.unwrap_or(true) {
        sink.fields(&fields, p.config.seed)?;
    }
    let report = json!({
        "experiment": "simulate-linear",
        "measure": m.label(),
        "kind": kind,
        "samples": samples,
        "lattice": lattice_summary(lat),
        "max_covariance_gap_in_se": worst_se,
    });
    Ok(Outcome { report, failures: Vec::new() })
}

fn solve(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let spec = p.equation();
    let lat = &p.lattices[0];
    let sols = solutions(p, lat, &source(p), p.config.ensemble.samples)?;
    let mut rows = Vec::new();
    for (s, sol) in sols.iter().enumerate() {
        let r = &sol.report;
        for (k, inc) in r.increments.iter().enumerate() {
            rows.push(vec![s.to_string(), k.to_string(), num(*inc), num(r.envelope[k])]);
        }
    }
    sink.csv("picard.csv", &["sample", "iteration", "increment", "envelope"].map(String::from), rows)?;
    sink.field_csv("field.csv", &sols[0].field)?;
    if p.config.output.fields.unwrap_or(true) {
        let fields: Vec<Field> = sols.iter().map(|s| s.field.clone()).collect();
        sink.fields(&fields, p.config.seed)?;
    }
    let failures: Vec<String> = sols
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.report.envelope_respected)
        .map(|(i, _)| format!("sample {i}: Picard increments exceed the Gronwall envelope"))
        .collect();
    let report = json!({
        "experiment": "solve",
        "measure": p.measures[0].label(),
        "kind": spec.kernel.kind,
        "samples": sols.len(),
        "lattice": lattice_summary(lat),
        "padding": spec.padding(),
        "picard": sols.iter().map(|s| &s.report).collect::<Vec<_>>(),
    });
    Ok(Outcome { report, failures })
}

fn observations(p: &Prepared, lattice: &ModeLattice, seed: u64) -> Result<Vec<Vec<f64>>> {
    let src = NoiseSource::Gaussian(SeedSpec::new(seed));
    let sols = solutions(p, lattice, &src, p.config.ensemble.samples)?;
    Ok(sols.iter().map(|s| p.points.iter().map(|&(r, n)| s.field.at(r, n)).collect()).collect())
}

fn converge(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let fam = family_of(p)?;
    let spec = p.equation();
    let a = &p.config.analysis;
    let dist = covariance_distance(&fam, spec.kernel.kind, &a.pairs, a.tol)?;
    let labels: Vec<String> = fam.members().iter().map(SpectralMeasure::label).collect();
    let rows = dist.iter().enumerate().map(|(i, d)| vec![i.to_string(), labels[i].clone(), num(*d)]).collect();
    sink.csv("distances.csv", &["member", "label", "covariance_distance"].map(String::from), rows)?;

    let mut energy = Vec::new();
    if !spec.drift.is_zero() {
        // members share one noise seed; the limit ensemble uses an independent one
        let seed = p.config.seed;
        let reference = observations(p, p.lattices.last().expect("limit lattice"), seed.wrapping_add(1))?;
        for lat in &p.lattices[..fam.members().len()] {
            let x = observations(p, lat, seed)?;
            energy.push(energy_test(&x, &reference, a.permutations, SeedSpec::new(seed))?);
        }
        let rows = energy
            .iter()
            .enumerate()
            .map(|(i, e)| vec![i.to_string(), labels[i].clone(), num(e.statistic), num(e.null_quantile_95), num(e.p_value)])
            .collect();
        sink.csv("energy.csv", &["member", "label", "energy_distance", "null_quantile_95", "p_value"].map(String::from), rows)?;
    }
    let rep = weak_convergence_report(labels, Some(dist), None, energy);
    let mut failures = Vec::new();
    if rep.covariance_decreasing == Some(false) {
        failures.push("covariance distances are not strictly decreasing".into());
    }
    if rep.energy_decreasing == Some(false) {
        failures.push("energy distances are not strictly decreasing".into());
    }
    if rep.final_within_null_band == Some(false) {
        failures.push("last member's energy distance lies outside the permutation null band".into());
    }
    Ok(Outcome { report: serde_json::to_value(&rep)?, failures })
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Space { .. } => "space",
        Direction::Time { .. } => "time",
    }
}

fn regularity(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let fam = family_of(p)?;
    let spec = p.equation();
    let a = &p.config.analysis;
    let kind: Kind = spec.kernel.kind;
    let q = a.q.unwrap_or_else(|| default_q(&fam));
    let h1 = h1_check(&fam, q, a.tol)?;
    let steps = spec.grid.steps;
    let max_lag = *a.lags.iter().max().expect("checked");
    let directions = [Direction::Space { row: steps, axis: 0 }, Direction::Time { row: steps - max_lag }];
    let src = source(p);
    let mut tables: Vec<Vec<MomentTable>> = vec![Vec::new(); directions.len()];
    for (m, lat) in fam.members().iter().zip(&p.lattices) {
        let fields = solutions(p, lat, &src, p.config.ensemble.samples)?.into_iter().map(|s| s.field).collect();
        let e = Ensemble::new(m.label(), p.config.seed, fields)?;
        for (k, &dir) in directions.iter().enumerate() {
            tables[k].push(increment_moments(&e, dir, &a.lags, a.p)?);
        }
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    if !h1.verdicts.h1 {
        failures.push(format!("(H1) fails at q = {q}"));
    }
    for (k, &dir) in directions.iter().enumerate() {
        let u = uniformity_report(&tables[k], second_moment_exponent(kind, dir, q))?;
        for (n, t) in tables[k].iter().enumerate() {
            for l in 0..t.lags.len() {
                rows.push(vec![
                    n.to_string(),
                    fam.members()[n].label(),
                    direction_name(dir).into(),
                    num(t.lags[l]),
                    num(t.estimates[l]),
                    num(t.std_errors[l]),
                    num(u.ratios[n][l]),
                ]);
            }
        }
        let fits: Vec<Option<HolderFit>> = tables[k].iter().map(|t| holder_fit(t, 0..t.lags.len()).ok()).collect();
        if !u.bounded {
            failures.push(format!("{} increments: normalized moments spread {:.3} exceeds 10", direction_name(dir), u.spread));
        }
        summaries.push(json!({ "direction": direction_name(dir), "uniformity": u, "fits": fits }));
    }
    sink.csv("moments.csv", &["member", "label", "direction", "lag", "estimate", "std_error", "ratio"].map(String::from), rows)?;
    let report = json!({
        "experiment": "regularity",
        "kind": kind,
        "q": q,
        "h1": h1.verdicts.h1,
        "p": a.p,
        "directions": summaries,
    });
    Ok(Outcome { report, failures })
}

fn grr(p: &Prepared, sink: &mut Sink) -> Result<Outcome> {
    let spec = p.equation();
    let g = &p.config.analysis.grr;
    let half = spec.grid.space.half_width();
    let params = GrrParams::new(g.gamma, spec.grid.space.dim + g.space_time as usize, g.k)?;
    let fields: Vec<Field> = solutions(p, &p.lattices[0], &source(p), p.config.ensemble.samples)?.into_iter().map(|s| s.field).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (s, f) in fields.iter().enumerate() {
        let sample = if g.space_time { RectangleSample::from_space_time(f, half) } else { RectangleSample::from_slice(f, spec.grid.steps, half) };
        let gamma = grr_gamma(&sample, &params);
        let check = grr_modulus_check(&sample, &params, gamma)?;
        worst = worst.max(check.max_ratio);
        if !check.holds {
            failures.push(format!("sample {s}: modulus bound violated (ratio {:.4})", check.max_ratio));
        }
        rows.push(vec![s.to_string(), num(gamma), num(check.max_ratio), check.holds.to_string()]);
    }
    sink.csv("grr.csv", &["sample", "gamma_functional", "max_ratio", "holds"].map(String::from), rows)?;
    if p.config.output.fields.unwrap_or(true) {
        sink.fields(&fields, p.config.seed)?;
    }
    let report = json!({
        "experiment": "grr",
        "params": params,
        "space_time": g.space_time,
        "samples": fields.len(),
        "worst_ratio": worst,
    });
    Ok(Outcome { report, failures })
}
