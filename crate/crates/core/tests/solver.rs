use spdelab::grid::{Field, Grid, SpaceTimeGrid};
use spdelab::kernels::{DataFn, InitialData, KernelSpec, Kind, Profile};
use spdelab::measures::SpectralMeasure;
use spdelab::noise::{build_lattice, ModeLattice, NoiseSource};
use spdelab::rng::SeedSpec;
use spdelab::solver::*;
use spdelab::Error;

fn spec(kind: Kind, dim: usize, drift: DriftSpec, data: InitialData, dx: f64, dt: f64, steps: usize, half: f64) -> EquationSpec {
    EquationSpec {
        kernel: KernelSpec::new(kind, dim).unwrap(),
        drift,
        data,
        grid: SpaceTimeGrid::new(dt, steps, Grid::covering(dim, dx, half).unwrap()).unwrap(),
    }
}

fn lattice_for(s: &EquationSpec, m: &SpectralMeasure) -> ModeLattice {
    build_lattice(m, s.padded_grid().unwrap().space.half_width(), s.horizon(), 0.01).unwrap()
}

fn white() -> SpectralMeasure {
    SpectralMeasure::fractional_line(0.5).unwrap()
}

fn one() -> InitialData {
    InitialData::new(Profile::Constant { value: 1.0 }, DataFn::zero())
}

fn run(s: &EquationSpec, source: NoiseSource) -> Solution {
    let lat = lattice_for(s, &white());
    solve_spde(s, &lat, &source, 0, 1e-13, 200).unwrap()
}

#[test]
fn zero_drift_returns_eta_exactly() {
    let s = spec(Kind::Heat, 1, DriftSpec::zero(), InitialData::zero(), 0.1, 0.05, 10, 1.0);
    let lat = lattice_for(&s, &white());
    let src = NoiseSource::Gaussian(SeedSpec::new(3));
    let eta = assemble_eta(&s, &lat, &src, 0).unwrap();
    let (z, rep) = picard_solve(&s, &eta, 1e-12, 10).unwrap();
    assert_eq!(rep.iterations, 1);
    assert_eq!(z, eta);
    let v = spdelab::noise::sample_field(Kind::Heat, &lat, &s.grid, &src, 0).unwrap();
    assert_eq!(solve_spde(&s, &lat, &src, 0, 1e-12, 10).unwrap().field, v);
}

#[test]
fn constant_wave_solution_without_noise() {
    let s = spec(Kind::Wave, 1, DriftSpec::zero(), one(), 0.1, 0.1, 10, 1.0);
    let out = run(&s, NoiseSource::Zero);
    assert!(out.field.values.iter().all(|&v| v == 1.0));
}

#[test]
fn constant_drift_is_integrated_exactly() {
    let c = 0.7;
    let w = spec(Kind::Wave, 1, Drift::Constant { value: c }.into(), InitialData::zero(), 0.1, 0.1, 10, 0.5);
    let out = run(&w, NoiseSource::Zero);
    let exact = Field::from_fn(out.field.grid, |t, _| c * t * t / 2.0);
    assert!(out.field.sup_distance(&exact) < 1e-13);

    let h = spec(Kind::Heat, 1, Drift::Constant { value: c }.into(), InitialData::zero(), 0.1, 0.1, 10, 0.5);
    let out = run(&h, NoiseSource::Zero);
    let exact = Field::from_fn(out.field.grid, |t, _| c * t);
    assert!(out.field.sup_distance(&exact) < 1e-8);
}

fn ode_error(kind: Kind, dt: f64) -> f64 {
    let steps = (1.0 / dt).round() as usize;
    let s = spec(kind, 1, Drift::Linear { slope: -1.0, intercept: 0.0 }.into(), one(), 0.25, dt, steps, 0.5);
    let out = run(&s, NoiseSource::Zero);
    let exact = Field::from_fn(out.field.grid, |t, _| match kind {
        Kind::Heat => (-t).exp(),
        Kind::Wave => t.cos(),
    });
    out.field.sup_distance(&exact)
}

#[test]
fn second_order_in_time() {
    for kind in [Kind::Heat, Kind::Wave] {
        let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| ode_error(kind, dt)).collect();
        for w in e.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..4.5).contains(&ratio), "{kind}: errors {e:?}");
        }
    }
}

#[test]
fn increments_stay_below_the_gronwall_envelope() {
    let m = SpectralMeasure::fractional_line(0.7).unwrap();
    for kind in [Kind::Heat, Kind::Wave] {
        let s = spec(kind, 1, Drift::Sine { amplitude: 0.5, frequency: 1.0 }.into(), one(), 0.05, 0.05, 20, 0.5);
        let lat = lattice_for(&s, &m);
        for sample in 0..3 {
            let out = solve_spde(&s, &lat, &NoiseSource::Gaussian(SeedSpec::new(8)), sample, 1e-13, 200).unwrap();
            let r = &out.report;
            assert!(r.envelope_respected, "{kind}: {:?} vs {:?}", r.increments, r.envelope);
            assert!(r.residual <= 1e-13);
            assert!(!r.continuum_caveat);
        }
    }
}

#[test]
fn truncation_level_above_the_observed_drift_changes_nothing() {
    let s = spec(Kind::Heat, 1, Drift::Linear { slope: 0.8, intercept: 0.0 }.into(), one(), 0.05, 0.05, 10, 0.5);
    let lat = lattice_for(&s, &white());
    let src = NoiseSource::Gaussian(SeedSpec::new(77));
    let base = solve_spde(&s, &lat, &src, 0, 1e-13, 200).unwrap();
    assert!(base.report.continuum_caveat);
    let m = base.report.max_abs_drift;
    let mut t = s.clone();
    t.drift = truncate_drift(&s.drift, m).unwrap();
    assert_eq!(solve_spde(&t, &lat, &src, 0, 1e-13, 200).unwrap().field, base.field);
    t.drift = truncate_drift(&s.drift, 0.5 * m).unwrap();
    assert_ne!(solve_spde(&t, &lat, &src, 0, 1e-13, 200).unwrap().field, base.field);
}

#[test]
fn truncate_examples() {
    let b = truncate_drift(&Drift::Linear { slope: 1.0, intercept: 0.0 }.into(), 2.0).unwrap();
    assert_eq!((b.eval(3.0), b.eval(-3.0), b.eval(1.0)), (2.0, -2.0, 1.0));
    assert_eq!(b.bound(), Some(2.0));
    assert_eq!(b.lipschitz(), 1.0);
    let s = truncate_drift(&Drift::Sine { amplitude: 10.0, frequency: 1.0 }.into(), 5.0).unwrap();
    assert!((-100..=100).all(|i| s.eval(i as f64 * 0.1).abs() <= 5.0));
    let inactive = truncate_drift(&Drift::Sine { amplitude: 1.0, frequency: 1.0 }.into(), 1.0).unwrap();
    assert!((-100..=100).all(|i| inactive.eval(i as f64 * 0.1) == (i as f64 * 0.1).sin()));
    assert!(truncate_drift(&DriftSpec::zero(), 0.0).is_err());
}

#[test]
fn operator_is_lipschitz_in_eta() {
    let s = spec(Kind::Wave, 1, Drift::Sine { amplitude: 1.0, frequency: 1.0 }.into(), InitialData::zero(), 0.05, 0.05, 20, 0.5);
    let lat = lattice_for(&s, &white());
    let c = continuity_constant(Kind::Wave, 1.0, s.horizon());
    let mut ratios = Vec::new();
    for trial in 0..20 {
        let a = assemble_eta(&s, &lat, &NoiseSource::Gaussian(SeedSpec::new(trial)), 0).unwrap();
        let b = assemble_eta(&s, &lat, &NoiseSource::Gaussian(SeedSpec::new(trial + 100)), 0).unwrap();
        let (fa, _) = picard_solve(&s, &a, 1e-13, 200).unwrap();
        let (fb, _) = picard_solve(&s, &b, 1e-13, 200).unwrap();
        ratios.push(fa.sup_distance(&fb) / a.sup_distance(&b));
    }
    assert!(ratios.iter().all(|&r| r <= c), "{ratios:?} vs {c}");
}

#[test]
fn wave_needs_the_cone_margin() {
    let s = spec(Kind::Wave, 1, Drift::Constant { value: 1.0 }.into(), InitialData::zero(), 0.1, 0.1, 10, 1.0);
    let narrow = Field::zeros(s.grid);
    assert!(matches!(picard_solve(&s, &narrow, 1e-12, 10), Err(Error::ConeViolation(_))));
}

#[test]
fn picard_reports_non_convergence() {
    let s = spec(Kind::Heat, 1, Drift::Sine { amplitude: 1.0, frequency: 3.0 }.into(), one(), 0.1, 0.1, 10, 0.5);
    let eta = Field::from_fn(s.padded_grid().unwrap(), |_, x| x[0]);
    assert!(matches!(picard_solve(&s, &eta, 1e-14, 2), Err(Error::NoConvergence { iterations: 2, .. })));
}

#[test]
fn hypotheses_are_enforced() {
    let bump = InitialData::new(Profile::Bump { height: 1.0, radius: 1.0 }, DataFn::zero());
    let s = spec(Kind::Wave, 2, Drift::Sine { amplitude: 1.0, frequency: 1.0 }.into(), bump.clone(), 0.1, 0.1, 2, 0.5);
    assert!(s.validate().is_err());
    let s = spec(Kind::Heat, 3, Drift::Sine { amplitude: 1.0, frequency: 1.0 }.into(), InitialData::zero(), 0.1, 0.1, 2, 0.2);
    assert!(s.validate().is_err());
    let lying = DriftSpec::custom(|x| 3.0 * x, 1.0, None);
    let s = spec(Kind::Heat, 1, lying, InitialData::zero(), 0.1, 0.1, 2, 0.5);
    assert!(s.violations().iter().any(|v| v.contains("Lipschitz")));
    // linear wave in 3d is fine: no convolution is needed
    let s = spec(Kind::Wave, 3, DriftSpec::zero(), bump, 0.25, 0.1, 2, 0.5);
    assert!(s.validate().is_ok());
}
