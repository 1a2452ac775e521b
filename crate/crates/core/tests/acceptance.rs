//! Desk-scale acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use spdelab::analysis::*;
use spdelab::covariance::{covariance, covariance_distance, Pair};
use spdelab::grid::{Field, Grid, SpaceTimeGrid};
use spdelab::kernels::{DataFn, InitialData, KernelSpec, Kind, Profile};
use spdelab::measures::*;
use spdelab::noise::*;
use spdelab::quadrature::{integrate, Tolerance};
use spdelab::rng::{channel, SeedSpec};
use spdelab::solver::*;

type Outcome = (bool, String);

fn white() -> SpectralMeasure {
    SpectralMeasure::fractional_line(0.5).unwrap()
}

fn family_member(n: u32) -> SpectralMeasure {
    SpectralMeasure::fractional_line(0.5 + 0.2 / n as f64).unwrap()
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn verdicts() -> Outcome {
    let v = dalang_integral(&white(), 1e-9).unwrap().value().unwrap_or(f64::NAN);
    let white_ok = (v - 0.5).abs() <= 1e-6;
    let iso_divergent = !dalang_integral(&SpectralMeasure::isotropic(2, 0.5).unwrap(), 1e-6).unwrap().is_finite();
    let grid: Vec<Vec<f64>> =
        [0.30, 0.40, 0.45, 0.48, 0.49, 0.51, 0.52, 0.55, 0.60, 0.70].iter().map(|&h| vec![h, 0.5]).collect();
    let mut matches = 0;
    for h in &grid {
        let finite = dalang_integral(&SpectralMeasure::anisotropic(h.clone()).unwrap(), 1e-6).unwrap().is_finite();
        matches += (finite == anisotropic_dalang_condition(h)) as usize;
    }
    (
        white_ok && iso_divergent && matches == grid.len(),
        format!("white {v:.9}, isotropic d=2 divergent {iso_divergent}, anisotropic {matches}/{}", grid.len()),
    )
}

fn transitions() -> Outcome {
    let quad = |f: &dyn Fn(f64) -> f64, b: f64| integrate(&|u| f(u), 0.0, b, &Tolerance::absolute(1e-16)).unwrap().value;
    let mut worst: f64 = 0.0;
    let mut ck: f64 = 0.0;
    for &w in &[0.0, 0.3, 1.0, 5.0, 25.0] {
        for &dt in &[0.01, 0.1, 0.5, 1.0] {
            worst = worst.max((heat_transition(w, dt).variance - quad(&|u| (-w * w * u).exp(), dt)).abs());
            let q = wave_transition(w, dt).noise;
            let s = |u: f64| if w == 0.0 { u } else { (u * w).sin() / w };
            worst = worst.max((q[0][0] - quad(&|u| s(u).powi(2), dt)).abs());
            worst = worst.max((q[1][1] - quad(&|u| (u * w).cos().powi(2), dt)).abs());
            worst = worst.max((q[0][1] - quad(&|u| s(u) * (u * w).cos(), dt)).abs());
            let (h, f) = (wave_transition(w, dt / 2.0), wave_transition(w, dt));
            let (m, q) = compose((h.matrix, h.noise), (h.matrix, h.noise));
            for i in 0..2 {
                for j in 0..2 {
                    ck = ck.max((m[i][j] - f.matrix[i][j]).abs()).max((q[i][j] - f.noise[i][j]).abs());
                }
            }
            let (h, f) = (heat_transition(w, dt / 2.0), heat_transition(w, dt));
            ck = ck.max((h.decay * h.decay * h.variance + h.variance - f.variance).abs());
        }
    }
    (worst <= 1e-12 && ck <= 1e-12, format!("one-step error {worst:.1e}, two half-steps {ck:.1e}"))
}

fn linear_variance() -> Outcome {
    let lat = build_lattice(&white(), 1.0, 1.0, 1e-3).unwrap();
    let src = NoiseSource::Gaussian(SeedSpec::new(3));
    let mut ok = true;
    let mut msg = Vec::new();
    for (kind, exact) in [(Kind::Heat, (1.0 / PI).sqrt()), (Kind::Wave, 0.25)] {
        let runs = sample_points(kind, &lat, &[1.0], &[vec![0.0]], &src, 0..10_000).unwrap();
        let sq: Vec<f64> = runs.iter().map(|r| r[[0, 0]].powi(2)).collect();
        let (mean, se) = mean_se(&sq);
        let bias = (lattice_covariance(kind, &lat, 1.0, &[0.0], 1.0, &[0.0]) - exact).abs();
        ok &= bias <= 1e-3 && (mean - exact).abs() <= 3.0 * se + bias;
        msg.push(format!("{kind} {mean:.4}±{se:.4} vs {exact:.4} (lattice bias {bias:.1e})"));
    }
    (ok, msg.join("; "))
}

fn covariance_vs_monte_carlo() -> Outcome {
    let mut ok = true;
    let mut msg = Vec::new();
    let time_set = [0.25, 0.5, 0.75, 1.0];
    for m in [SpectralMeasure::fractional_line(0.7).unwrap(), SpectralMeasure::riesz(2, 1.0).unwrap()] {
        let d = m.dimension();
        let mut draw = SeedSpec::new(41).stream(d as u32, 0, channel::AUXILIARY);
        let mut pairs = Vec::new();
        for _ in 0..10 {
            let mut pt = || (0..d).map(|_| 0.5 * draw.next_uniform() - 0.25).collect::<Vec<f64>>();
            let (x, y) = (pt(), pt());
            let (t, s) = (time_set[draw.below(4)], time_set[draw.below(4)]);
            pairs.push(Pair::new(t, x, s, y));
        }
        let points: Vec<Vec<f64>> = pairs.iter().flat_map(|p| [p.x.clone(), p.x_prime.clone()]).collect();
        // lattice spacing π/4 keeps the periodic images beyond the correlation range of the queries
        let lat = build_lattice(&m, 1.0, 1.0, 0.01).unwrap();
        for kind in [Kind::Heat, Kind::Wave] {
            let oracle = covariance(kind, &m, &pairs, 1e-8).unwrap();
            let src = NoiseSource::Gaussian(SeedSpec::new(4 + d as u64));
            let runs = sample_points(kind, &lat, &time_set, &points, &src, 0..10_000).unwrap();
            let row = |t: f64| time_set.iter().position(|&s| s == t).unwrap();
            let mut worst: f64 = 0.0;
            for (k, p) in pairs.iter().enumerate() {
                let (i, j) = (row(p.t), row(p.t_prime));
                let prod: Vec<f64> = runs.iter().map(|r| r[[i, 2 * k]] * r[[j, 2 * k + 1]]).collect();
                let (mean, se) = mean_se(&prod);
                worst = worst.max((mean - oracle[k]).abs() / se);
            }
            ok &= worst <= 4.0;
            msg.push(format!("{} {kind} max {worst:.2} SE ({} modes)", m.label(), lat.len()));
        }
    }
    (ok, msg.join("; "))
}

fn linear_weak_convergence() -> Outcome {
    let tol = 1e-3;
    let ns = [1, 2, 4, 8, 16, 32, 64];
    let fam = MeasureFamily::new(ns.iter().map(|&n| family_member(n)).collect(), white()).unwrap();
    let pairs = vec![
        Pair::new(0.5, vec![0.0], 1.0, vec![0.3]),
        Pair::new(1.0, vec![0.0], 1.0, vec![0.0]),
        Pair::new(0.25, vec![0.1], 0.75, vec![-0.2]),
        Pair::new(1.0, vec![0.5], 1.0, vec![-0.5]),
        Pair::new(0.1, vec![0.0], 0.1, vec![0.05]),
    ];
    let mut ok = true;
    let mut msg = Vec::new();
    for kind in [Kind::Heat, Kind::Wave] {
        let d = covariance_distance(&fam, kind, &pairs, tol).unwrap();
        let again = covariance_distance(&fam, kind, &pairs, tol).unwrap();
        let last = *d.last().unwrap();
        ok &= strictly_decreasing(&d) && last <= 10.0 * tol && d == again;
        msg.push(format!("{kind} {:.3e} → {last:.3e}", d[0]));
    }
    (ok, format!("{} (tol {tol:.0e})", msg.join(", ")))
}

fn heat_sine_spec() -> EquationSpec {
    EquationSpec {
        kernel: KernelSpec::heat(1).unwrap(),
        drift: Drift::Sine { amplitude: 0.5, frequency: 1.0 }.into(),
        data: InitialData::zero(),
        grid: SpaceTimeGrid::new(0.025, 10, Grid::covering(1, 0.1, 0.5).unwrap()).unwrap(),
    }
}

fn observations(spec: &EquationSpec, m: &SpectralMeasure, seed: u64, samples: u32) -> Vec<Vec<f64>> {
    let lat = build_lattice(m, spec.padded_grid().unwrap().space.half_width(), spec.horizon(), 0.01).unwrap();
    let src = NoiseSource::Gaussian(SeedSpec::new(seed));
    let g = spec.grid.space;
    let nodes: Vec<usize> = [-2, 0, 2].iter().map(|&i| g.index(&[i]).unwrap()).collect();
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let f = solve_spde(spec, &lat, &src, s, 1e-12, 200).unwrap().field;
            let mut o: Vec<f64> = nodes.iter().map(|&i| f.at(10, i)).collect();
            o.push(f.at(5, nodes[1]));
            o
        })
        .collect()
}

fn nonlinear_weak_convergence() -> Outcome {
    let spec = heat_sine_spec();
    // members share their noise draws; the reference ensemble is independent of them
    let reference = observations(&spec, &white(), 1001, 1000);
    let tests: Vec<EnergyTest> = [1, 4, 16, 64]
        .iter()
        .map(|&n| {
            let x = observations(&spec, &family_member(n), 2002, 1000);
            energy_test(&x, &reference, 1000, SeedSpec::new(n as u64)).unwrap()
        })
        .collect();
    let r = weak_convergence_report(vec![], None, None, tests);
    let stats: Vec<String> = r.energy.iter().map(|e| format!("{:.2e}", e.statistic)).collect();
    let last = r.energy.last().unwrap();
    (
        r.energy_decreasing == Some(true) && r.final_within_null_band == Some(true),
        format!("energy [{}], n=64 band {:.2e} (p = {:.3})", stats.join(", "), last.null_quantile_95, last.p_value),
    )
}

fn holder_suite() -> Outcome {
    let q = 1.0;
    let members: Vec<SpectralMeasure> = (1..=4).map(family_member).collect();
    let fam = MeasureFamily::new(members.clone(), white()).unwrap();
    let h1 = h1_check(&fam, q, 1e-6).unwrap().verdicts.h1;
    let g = SpaceTimeGrid::new(0.01, 32, Grid::covering(1, 0.01, 0.2).unwrap()).unwrap();
    let lags = [1, 2, 4, 8, 16];
    let mut ok = h1;
    let mut msg = vec![format!("(H1) at q={q}: {h1}")];
    for (kind, dir) in
        [(Kind::Wave, Direction::Space { row: 32, axis: 0 }), (Kind::Wave, Direction::Time { row: 16 }), (Kind::Heat, Direction::Time { row: 16 })]
    {
        let tables: Vec<MomentTable> = members
            .iter()
            .map(|m| {
                let lat = build_lattice(m, 0.5, g.horizon(), 1e-3).unwrap();
                let src = NoiseSource::Gaussian(SeedSpec::new(7));
                let fields = (0..400).into_par_iter().map(|s| sample_field(kind, &lat, &g, &src, s).unwrap()).collect();
                increment_moments(&Ensemble::new(m.label(), 7, fields).unwrap(), dir, &lags, 2.0).unwrap()
            })
            .collect();
        let u = uniformity_report(&tables, second_moment_exponent(kind, dir, q)).unwrap();
        ok &= u.bounded;
        let name = match dir {
            Direction::Space { .. } => "space",
            Direction::Time { .. } => "time",
        };
        msg.push(format!("{kind} {name} spread {:.2}", u.spread));
    }
    (ok, msg.join(", "))
}

fn picard_spec(kind: Kind, drift: DriftSpec, data: InitialData, dx: f64, dt: f64, steps: usize, half: f64) -> EquationSpec {
    EquationSpec {
        kernel: KernelSpec::new(kind, 1).unwrap(),
        drift,
        data,
        grid: SpaceTimeGrid::new(dt, steps, Grid::covering(1, dx, half).unwrap()).unwrap(),
    }
}

fn noiseless(s: &EquationSpec) -> Field {
    let lat = build_lattice(&white(), s.padded_grid().unwrap().space.half_width(), s.horizon(), 0.01).unwrap();
    solve_spde(s, &lat, &NoiseSource::Zero, 0, 1e-13, 200).unwrap().field
}

fn picard_gronwall() -> Outcome {
    let one = InitialData::new(Profile::Constant { value: 1.0 }, DataFn::zero());
    let c = 0.7;
    let mut exact_err: f64 = 0.0;
    for kind in [Kind::Heat, Kind::Wave] {
        for dt in [0.1, 0.05] {
            let s = picard_spec(kind, Drift::Constant { value: c }.into(), InitialData::zero(), 0.1, dt, (1.0 / dt) as usize, 0.5);
            let f = noiseless(&s);
            let exact = Field::from_fn(f.grid, |t, _| if kind == Kind::Heat { c * t } else { c * t * t / 2.0 });
            exact_err = exact_err.max(f.sup_distance(&exact));
        }
    }
    // the constant-drift solution is reproduced to round-off, so the order is measured on b(u) = -u
    let mut ratios = Vec::new();
    for kind in [Kind::Heat, Kind::Wave] {
        let err = |dt: f64| {
            let s = picard_spec(kind, Drift::Linear { slope: -1.0, intercept: 0.0 }.into(), one.clone(), 0.25, dt, (1.0 / dt).round() as usize, 0.5);
            let f = noiseless(&s);
            f.sup_distance(&Field::from_fn(f.grid, |t, _| if kind == Kind::Heat { (-t).exp() } else { t.cos() }))
        };
        let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| err(dt)).collect();
        ratios.extend(e.windows(2).map(|w| w[0] / w[1]));
    }
    let m = SpectralMeasure::fractional_line(0.7).unwrap();
    let mut envelope_ok = true;
    for kind in [Kind::Heat, Kind::Wave] {
        let s = picard_spec(kind, Drift::Sine { amplitude: 0.5, frequency: 1.0 }.into(), one.clone(), 0.05, 0.05, 20, 0.5);
        let lat = build_lattice(&m, s.padded_grid().unwrap().space.half_width(), s.horizon(), 0.01).unwrap();
        for sample in 0..5 {
            let out = solve_spde(&s, &lat, &NoiseSource::Gaussian(SeedSpec::new(8)), sample, 1e-13, 200).unwrap();
            envelope_ok &= out.report.envelope_respected;
        }
    }
    let s = picard_spec(Kind::Heat, DriftSpec::zero(), InitialData::zero(), 0.1, 0.05, 10, 1.0);
    let lat = build_lattice(&white(), s.padded_grid().unwrap().space.half_width(), s.horizon(), 0.01).unwrap();
    let eta = assemble_eta(&s, &lat, &NoiseSource::Gaussian(SeedSpec::new(3)), 0).unwrap();
    let zero_exact = picard_solve(&s, &eta, 1e-12, 10).unwrap().0 == eta;
    let ratios_ok = ratios.iter().all(|r| (3.5..=4.5).contains(r));
    (
        exact_err <= 1e-8 && ratios_ok && envelope_ok && zero_exact,
        format!(
            "constant drift error {exact_err:.1e}, halving ratios [{}], envelopes {envelope_ok}, b=0 bit-exact {zero_exact}",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn truncation() -> Outcome {
    let one = InitialData::new(Profile::Constant { value: 1.0 }, DataFn::zero());
    let mut ok = true;
    let mut levels = Vec::new();
    for (kind, drift) in [
        (Kind::Heat, Drift::Linear { slope: 0.8, intercept: 0.0 }),
        (Kind::Wave, Drift::Linear { slope: -1.0, intercept: 0.5 }),
    ] {
        let s = picard_spec(kind, drift.into(), one.clone(), 0.05, 0.05, 10, 0.5);
        let lat = build_lattice(&white(), s.padded_grid().unwrap().space.half_width(), s.horizon(), 0.01).unwrap();
        for seed in [77, 78] {
            let src = NoiseSource::Gaussian(SeedSpec::new(seed));
            let base = solve_spde(&s, &lat, &src, 0, 1e-13, 200).unwrap();
            let m = base.report.max_abs_drift;
            let mut t = s.clone();
            for level in [m, 2.0 * m] {
                t.drift = truncate_drift(&s.drift, level).unwrap();
                ok &= solve_spde(&t, &lat, &src, 0, 1e-13, 200).unwrap().field == base.field;
            }
            levels.push(format!("{m:.3}"));
        }
    }
    (ok, format!("bit-exact at m = observed sup [{}]", levels.join(", ")))
}

fn grr() -> Outcome {
    let p = GrrParams::new(8.0, 1, 1.0).unwrap();
    let g = SpaceTimeGrid::new(0.5, 1, Grid::covering(1, 1.0 / 128.0, 0.5).unwrap()).unwrap();
    let lat = build_lattice(&white(), 0.5, 0.5, 1e-3).unwrap();
    let src = NoiseSource::Gaussian(SeedSpec::new(10));
    let mut homogeneity: f64 = 0.0;
    let mut worst: f64 = 0.0;
    let mut detected = 0;
    for s in 0..100 {
        let f = sample_field(Kind::Heat, &lat, &g, &src, s).unwrap();
        let sample = RectangleSample::from_slice(&f, 1, 0.5);
        let gamma = grr_gamma(&sample, &p);
        if s < 10 {
            for c in [-3.0, 0.5, 2.0] {
                let mut scaled = sample.clone();
                scaled.values.iter_mut().for_each(|v| *v *= c);
                let expect = f64::abs(c).powf(p.gamma) * gamma;
                homogeneity = homogeneity.max((grr_gamma(&scaled, &p) - expect).abs() / expect);
            }
        }
        worst = worst.max(grr_modulus_check(&sample, &p, gamma).unwrap().max_ratio);
        detected += !grr_modulus_check(&sample, &p, gamma * 1e-16).unwrap().holds as usize;
    }
    (
        homogeneity <= 1e-12 && worst <= 1.05 && detected == 100,
        format!("homogeneity {homogeneity:.1e}, worst modulus ratio {worst:.3}, violations detected {detected}/100"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, u64); 10] = [
        ("Dalang and anisotropic verdicts", verdicts, 30),
        ("mode transitions and two-step composition", transitions, 1),
        ("white-noise variance of the linear solution", linear_variance, 120),
        ("covariance oracle against Monte Carlo", covariance_vs_monte_carlo, 600),
        ("covariance distance along the fractional family", linear_weak_convergence, 300),
        ("energy distance for the sine-drift heat equation", nonlinear_weak_convergence, 1200),
        ("normalized increment moments over an (H1) family", holder_suite, 600),
        ("Picard iteration and Gronwall envelopes", picard_gronwall, 60),
        ("drift truncation above the observed range", truncation, 60),
        ("GRR functional and modulus", grr, 120),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = ok && in_time;
        failed += !pass as usize;
        let timing = if in_time { String::new() } else { format!(" over the {budget} s budget") };
        println!("{} {:>2} {name}: {detail} [{:.1} s{timing}]", if pass { "PASS" } else { "FAIL" }, i + 1, elapsed.as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
