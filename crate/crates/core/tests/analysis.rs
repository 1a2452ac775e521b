use proptest::prelude::*;
use spdelab::analysis::*;
use spdelab::covariance::{covariance, Pair};
use spdelab::grid::{Field, Grid, SpaceTimeGrid};
use spdelab::kernels::Kind;
use spdelab::measures::SpectralMeasure;
use spdelab::noise::{build_lattice, sample_field, NoiseSource};
use spdelab::quadrature::{integrate, Tolerance};
use spdelab::rng::SeedSpec;

fn grid1(dx: f64, half: f64, dt: f64, steps: usize) -> SpaceTimeGrid {
    SpaceTimeGrid::new(dt, steps, Grid::covering(1, dx, half).unwrap()).unwrap()
}

fn ensemble(kind: Kind, m: &SpectralMeasure, grid: SpaceTimeGrid, samples: u32, seed: u64) -> Ensemble {
    let lat = build_lattice(m, grid.space.half_width().max(0.5), grid.horizon(), 0.001).unwrap();
    let src = NoiseSource::Gaussian(SeedSpec::new(seed));
    let fields = (0..samples).map(|s| sample_field(kind, &lat, &grid, &src, s).unwrap()).collect();
    Ensemble::new(m.label(), seed, fields).unwrap()
}

#[test]
fn deterministic_increments() {
    let g = grid1(0.1, 1.0, 0.1, 2);
    let lin = Ensemble::new("x", 0, vec![Field::from_fn(g, |_, x| x[0]); 30]).unwrap();
    let tab = increment_moments(&lin, Direction::Space { row: 1, axis: 0 }, &[1, 2, 3], 2.0).unwrap();
    for (e, h) in tab.estimates.iter().zip(&tab.lags) {
        assert!((e - h * h).abs() < 1e-14);
    }
    assert!(tab.std_errors.iter().all(|&s| s == 0.0));
    let flat = Ensemble::new("c", 0, vec![Field::from_fn(g, |_, _| 3.0); 30]).unwrap();
    let tab = increment_moments(&flat, Direction::Time { row: 0 }, &[1, 2], 2.0).unwrap();
    assert_eq!(tab.estimates, vec![0.0, 0.0]);
    let few = Ensemble::new("c", 0, vec![Field::from_fn(g, |_, _| 3.0); 29]).unwrap();
    assert!(matches!(
        increment_moments(&few, Direction::Time { row: 0 }, &[1], 2.0),
        Err(spdelab::Error::InsufficientSamples { got: 29, needed: 30 })
    ));
}

#[test]
fn time_increments_match_the_covariance_oracle() {
    let m = SpectralMeasure::fractional_line(0.5).unwrap();
    let g = grid1(0.25, 0.5, 0.1, 6);
    let e = ensemble(Kind::Heat, &m, g, 600, 17);
    let row = 2;
    let tab = increment_moments(&e, Direction::Time { row }, &[1, 2, 4], 2.0).unwrap();
    for (k, &lag) in [1usize, 2, 4].iter().enumerate() {
        let (t, s) = (row as f64 * 0.1, (row + lag) as f64 * 0.1);
        let c = covariance(
            Kind::Heat,
            &m,
            &[Pair::new(t, vec![0.0], t, vec![0.0]), Pair::new(t, vec![0.0], s, vec![0.0]), Pair::new(s, vec![0.0], s, vec![0.0])],
            1e-9,
        )
        .unwrap();
        let oracle = c[0] - 2.0 * c[1] + c[2];
        // lattice truncation at ε = 0.01 adds a bias well below the MC error here
        assert!((tab.estimates[k] - oracle).abs() < 4.0 * tab.std_errors[k] + 2e-3, "lag {lag}: {} ± {} vs {oracle}", tab.estimates[k], tab.std_errors[k]);
    }
}

fn synthetic(exponent: f64, noise: f64) -> MomentTable {
    let mut s = SeedSpec::new(4).stream(0, 0, 9);
    let lags: Vec<f64> = (1..=8).map(|i| 0.01 * i as f64).collect();
    let estimates = lags.iter().map(|h| h.powf(exponent) * (1.0 + noise * (2.0 * s.next_uniform() - 1.0))).collect();
    MomentTable { direction: Direction::Time { row: 0 }, std_errors: vec![0.0; 8], lags, p: 2.0, estimates, samples: 100 }
}

#[test]
fn holder_fit_on_synthetic_tables() {
    let f = holder_fit(&synthetic(1.5, 0.0), 0..8).unwrap();
    assert!((f.slope - 1.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
    let f = holder_fit(&synthetic(1.5, 0.01), 0..8).unwrap();
    assert!((f.slope - 1.5).abs() < 0.05);
    assert!(holder_fit(&synthetic(1.5, 0.0), 0..3).is_err());
    let mut t = synthetic(1.0, 0.0);
    t.estimates[2] = 0.0;
    assert!(holder_fit(&t, 0..8).is_err());
}

#[test]
fn heat_space_increments_respect_the_bound() {
    let m = SpectralMeasure::fractional_line(0.5).unwrap();
    let g = grid1(1.0 / 64.0, 0.5, 0.25, 2);
    let e = ensemble(Kind::Heat, &m, g, 200, 3);
    let lags = [1, 2, 4, 8, 16];
    let tab = increment_moments(&e, Direction::Space { row: 2, axis: 0 }, &lags, 2.0).unwrap();
    let q = 1.0;
    let fit = holder_fit(&tab, 0..5).unwrap();
    assert!(fit.slope >= 2.0 - q - 0.1, "{fit:?}");
    let u = uniformity_report(&[tab], second_moment_exponent(Kind::Heat, Direction::Space { row: 0, axis: 0 }, q)).unwrap();
    assert!(u.bounded, "{u:?}");
}

#[test]
fn uniform_bounds_over_a_family() {
    let g = grid1(0.02, 0.3, 0.02, 10);
    let q = 1.4;
    let tables: Vec<MomentTable> = [1, 2, 3, 4]
        .iter()
        .map(|&n| {
            let m = SpectralMeasure::fractional_line(0.5 + 0.2 / n as f64).unwrap();
            let e = ensemble(Kind::Wave, &m, g, 100, 5);
            increment_moments(&e, Direction::Space { row: 10, axis: 0 }, &[1, 2, 4, 8, 16], 2.0).unwrap()
        })
        .collect();
    let u = uniformity_report(&tables, second_moment_exponent(Kind::Wave, Direction::Time { row: 0 }, q)).unwrap();
    assert!(u.bounded, "{u:?}");
    let same = uniformity_report(&[tables[0].clone(), tables[0].clone()], 2.0 - q).unwrap();
    assert_eq!(same.ratios[0], same.ratios[1]);
}

fn line_sample(n: usize, f: impl Fn(f64) -> f64) -> RectangleSample {
    let h = 1.0 / (n - 1) as f64;
    let points: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * h]).collect();
    RectangleSample {
        values: points.iter().map(|p| f(p[0])).collect(),
        volumes: (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect(),
        points,
        min_side: 1.0,
    }
}

#[test]
fn grr_gamma_of_the_identity() {
    // ∬_{[0,1]²} |x - y|^{-1/2} dx dy by nested quadrature
    let tol = Tolerance::absolute(1e-12);
    let inner = |x: f64| 2.0 * integrate(&|u: f64| u.powf(-0.5), 0.0, x, &tol).map(|e| e.value).unwrap_or(2.0 * x.sqrt());
    let oracle = integrate(&inner, 0.0, 1.0, &tol).unwrap().value;
    assert!((oracle - 8.0 / 3.0).abs() < 1e-6);
    let p = GrrParams::new(2.0, 1, 0.5).unwrap();
    let errs: Vec<f64> = [101, 401, 1601].iter().map(|&n| (grr_gamma(&line_sample(n, |x| x), &p) - oracle).abs() / oracle).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2] && errs[2] < 0.03, "{errs:?}");
    assert_eq!(grr_gamma(&line_sample(50, |_| 2.0), &p), 0.0);
}

#[test]
fn grr_modulus_on_heat_paths() {
    let m = SpectralMeasure::fractional_line(0.5).unwrap();
    let g = grid1(1.0 / 64.0, 0.5, 0.5, 1);
    let e = ensemble(Kind::Heat, &m, g, 20, 12);
    let p = GrrParams::new(8.0, 1, 1.0).unwrap();
    for f in &e.fields {
        let s = RectangleSample::from_slice(f, 1, 0.5);
        let gv = grr_gamma(&s, &p);
        let c = grr_modulus_check(&s, &p, gv).unwrap();
        assert!(c.holds && c.max_ratio > 0.0, "{c:?}");
        assert!(!grr_modulus_check(&s, &p, gv * 1e-16).unwrap().holds);
    }
    let flat = line_sample(20, |_| 1.0);
    let c = grr_modulus_check(&flat, &p, 0.0).unwrap();
    assert!(c.holds && c.max_ratio == 0.0);
}

#[test]
fn grr_bound_is_continuous_at_the_cap() {
    let p = GrrParams::new(4.0, 2, 0.5).unwrap();
    let a = grr_bound(&p, 1.0, 1.0 - 1e-12, 1.0);
    let b = grr_bound(&p, 1.0, 1.0 + 1e-12, 1.0);
    assert!((a - b).abs() < 1e-9 * a);
    assert!((p.ball_constant() - std::f64::consts::PI / 16.0).abs() < 1e-15);
}

#[test]
fn energy_distance_calibration() {
    let normals = |seed: u64, n: u32, shift: f64| -> Vec<Vec<f64>> {
        let s = SeedSpec::new(seed);
        (0..n)
            .map(|i| {
                let z = s.normal_pair(spdelab::rng::StreamKey { sample: i, mode: 0, channel: 0, step: 0 });
                vec![z[0] + shift, z[1]]
            })
            .collect()
    };
    let mut inside = 0;
    for rep in 0..50 {
        let t = energy_test(&normals(2 * rep, 60, 0.0), &normals(2 * rep + 1, 60, 0.0), 400, SeedSpec::new(rep)).unwrap();
        inside += t.within_null_band as usize;
    }
    assert!(inside >= 45, "{inside}/50 inside the band");
    let t = energy_test(&normals(1, 200, 0.0), &normals(2, 200, 0.5), 400, SeedSpec::new(9)).unwrap();
    assert!(!t.within_null_band && t.p_value < 0.01);
    let a = normals(5, 40, 0.0);
    assert!(energy_distance(&a, &a).unwrap().abs() < 1e-14);
}

#[test]
fn report_summarizes_trends() {
    let r = weak_convergence_report(vec!["a".into(), "b".into()], Some(vec![0.1, 0.01]), None, vec![]);
    assert_eq!(r.covariance_decreasing, Some(true));
    assert_eq!(r.energy_decreasing, None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grr_gamma_is_homogeneous(c in -5.0f64..5.0, gamma in 1.0f64..8.0, k in 0.1f64..2.0) {
        let p = GrrParams::new(gamma, 1, k).unwrap();
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let a = grr_gamma(&line_sample(64, f), &p);
        let b = grr_gamma(&line_sample(64, |x| c * f(x)), &p);
        prop_assert!((b - c.abs().powf(gamma) * a).abs() <= 1e-12 * b.abs().max(1e-300));
    }

    #[test]
    fn jackknife_of_the_mean_is_the_standard_error(v in proptest::collection::vec(-10.0f64..10.0, 2..50)) {
        let (m, se) = jackknife_mean(&v);
        let n = v.len() as f64;
        let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!((se - sd / n.sqrt()).abs() < 1e-9 * (1.0 + sd));
    }
}
