use std::f64::consts::PI;

use proptest::prelude::*;
use spdelab::grid::Grid;
use spdelab::kernels::*;
use spdelab::quadrature::{integrate, Tolerance};

#[test]
fn fourier_transform_values() {
    assert!(fourier_g(Kind::Wave, 1.0, PI).abs() < 1e-15);
    assert!((fourier_g(Kind::Heat, 2.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(fourier_g(Kind::Wave, 2.5, 0.0), 2.5);
}

#[test]
fn kernel_masses() {
    assert_eq!(kernel_mass(Kind::Wave, 2.5), 2.5);
    assert_eq!(kernel_mass(Kind::Heat, 0.3), 1.0);
    assert_eq!(kernel_mass(Kind::Wave, 0.1), 0.1);
}

#[test]
fn wave_line_weights_are_cell_exact() {
    let g = Grid::new(1, 0.25, 8).unwrap();
    let w = kernel_weights(KernelSpec::wave(1).unwrap(), 1.0, &g).unwrap();
    assert_eq!(w.total(), 1.0);
    let w = kernel_weights(KernelSpec::wave(1).unwrap(), 0.3, &g).unwrap();
    assert!((w.total() - 0.3).abs() < 1e-15);
}

#[test]
fn heat_weights_capture_gaussian_mass() {
    let g = Grid::new(1, 0.05, 100).unwrap();
    let w = kernel_weights(KernelSpec::heat(1).unwrap(), 0.5, &g).unwrap();
    assert!((w.total() - 1.0).abs() < 1e-8);
    let g = Grid::new(2, 0.1, 30).unwrap();
    let w = kernel_weights(KernelSpec::heat(2).unwrap(), 0.2, &g).unwrap();
    assert!((w.total() - 1.0).abs() < 1e-8);
}

#[test]
fn sphere_rule_mass() {
    let g = Grid::new(3, 0.1, 4).unwrap();
    let w = kernel_weights(KernelSpec::wave(3).unwrap(), 1.0, &g).unwrap();
    assert!((w.total() - 1.0).abs() < 1e-10);
    let (pts, wts) = sphere_rule(2.0, 16);
    // second moment of the uniform measure on the sphere of radius 2: E[x²] = 4/3
    let m2: f64 = pts.iter().zip(&wts).map(|(p, w)| w * p[0] * p[0]).sum();
    assert!((m2 - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn plane_wave_weights_are_unsupported() {
    let g = Grid::new(2, 0.1, 4).unwrap();
    assert!(matches!(
        kernel_weights(KernelSpec::wave(2).unwrap(), 1.0, &g),
        Err(spdelab::Error::UnsupportedKernel(_))
    ));
    assert!(KernelSpec::wave(4).is_err());
}

#[test]
fn heat_weights_match_fourier_transform() {
    let g = Grid::new(1, 0.02, 400).unwrap();
    let t = 0.3;
    let KernelWeights::Stencil { offsets, weights } = kernel_weights(KernelSpec::heat(1).unwrap(), t, &g).unwrap() else {
        panic!()
    };
    for &xi in &[0.0, 1.0, 5.0, 20.0] {
        let s: f64 = offsets.iter().zip(&weights).map(|(o, w)| w * (xi * o[0] as f64 * g.dx).cos()).sum();
        assert!((s - fourier_g(Kind::Heat, t, xi)).abs() < 1e-4, "xi = {xi}");
    }
}

#[test]
fn dalembert_constant_data() {
    let k = KernelSpec::wave(1).unwrap();
    let one = InitialData::new(Profile::Constant { value: 1.0 }, DataFn::zero());
    assert_eq!(initial_term(k, &one, 0.7, &[0.3]).unwrap(), 1.0);
    let vel = InitialData::new(DataFn::zero(), Profile::Constant { value: 1.0 });
    assert!((initial_term(k, &vel, 0.5, &[0.0]).unwrap() - 0.5).abs() < 1e-14);
}

#[test]
fn heat_smooths_odd_data_to_zero() {
    let k = KernelSpec::heat(1).unwrap();
    let data = InitialData::new(Profile::ClippedLinear { slope: 1.0, clip: 10.0 }, DataFn::zero());
    let v = initial_term(k, &data, 0.01, &[0.0]).unwrap();
    // brute-force oracle on the symmetric integrand
    let f = |y: f64| y.clamp(-10.0, 10.0) * (-y * y / 0.02).exp() / (2.0 * PI * 0.01).sqrt();
    let oracle = integrate(&f, -1.0, 1.0, &Tolerance::absolute(1e-14)).unwrap().value;
    assert!((v - oracle).abs() < 1e-12 && v.abs() < 1e-12);
}

#[test]
fn heat_of_sine_decays_exactly() {
    // e^{-t k²/2} sin(k x)
    let k = KernelSpec::heat(1).unwrap();
    let data = InitialData::new(Profile::Sine { amplitude: 1.0, frequency: 3.0 }, DataFn::zero());
    let v = initial_term(k, &data, 0.2, &[0.4]).unwrap();
    assert!((v - (-0.9f64).exp() * 1.2f64.sin()).abs() < 1e-10);
}

#[test]
fn wave_plane_and_space_on_quadratic_data() {
    // u0 = |y|²: the solution is |x|² + d t²
    let u0 = DataFn::Custom {
        f: std::sync::Arc::new(|y: &[f64]| y.iter().map(|v| v * v).sum()),
        gradient: Some(std::sync::Arc::new(|y: &[f64]| y.iter().map(|v| 2.0 * v).collect())),
        smoothness: Smoothness::C1,
    };
    let data = InitialData::new(u0, DataFn::zero());
    let v = initial_term(KernelSpec::wave(2).unwrap(), &data, 0.7, &[0.3, -0.2]).unwrap();
    assert!((v - (0.13 + 2.0 * 0.49)).abs() < 1e-10, "{v}");
    let v = initial_term(KernelSpec::wave(3).unwrap(), &data, 0.7, &[0.3, -0.2, 0.1]).unwrap();
    assert!((v - (0.14 + 3.0 * 0.49)).abs() < 1e-10, "{v}");
    // velocity only: t · (average of v0) for constant v0
    let data = InitialData::new(DataFn::zero(), Profile::Constant { value: 2.0 });
    let v = initial_term(KernelSpec::wave(2).unwrap(), &data, 0.5, &[0.0, 0.0]).unwrap();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn wave_in_higher_dimension_needs_differentiable_data() {
    let data = InitialData::new(Profile::Weierstrass { alpha: 0.5, amplitude: 1.0, terms: 10 }, DataFn::zero());
    assert!(matches!(
        initial_term(KernelSpec::wave(2).unwrap(), &data, 0.5, &[0.0, 0.0]),
        Err(spdelab::Error::InvalidInitialData(_))
    ));
}

fn bound(k: KernelSpec, data: &InitialData, t: f64) -> f64 {
    let (DataFn::Builtin(u), DataFn::Builtin(v)) = (&data.u0, &data.v0) else { panic!() };
    match (k.kind, k.dim) {
        (Kind::Heat, _) => u.sup(),
        (Kind::Wave, 1) => u.sup() + t * v.sup(),
        (Kind::Wave, 2) => u.sup() + t * v.sup() + t * PI / 4.0 * u.gradient_sup(),
        _ => u.sup() + t * v.sup() + t * u.gradient_sup(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn weights_reproduce_mass(heat in any::<bool>(), dim in 1usize..3, t in 0.05f64..2.0) {
        let (k, g) = if heat {
            (KernelSpec::heat(dim).unwrap(), Grid::covering(dim, t.sqrt() / 4.0, 6.5 * t.sqrt()).unwrap())
        } else {
            let d = if dim == 2 { 3 } else { 1 };
            (KernelSpec::wave(d).unwrap(), Grid::covering(d, 0.1, t + 0.2).unwrap())
        };
        let w = kernel_weights(k, t, &g).unwrap();
        let tol = if heat { 1e-8 } else { 1e-10 * t.max(1.0) };
        prop_assert!((w.total() - kernel_mass(k.kind, t)).abs() <= tol);
    }

    #[test]
    fn initial_term_is_bounded(t in 0.0f64..1.5, x in -2.0f64..2.0, y in -2.0f64..2.0, which in 0usize..3) {
        let data = InitialData::new(
            Profile::Bump { height: 1.5, radius: 1.0 },
            Profile::Sine { amplitude: 0.5, frequency: 2.0 },
        );
        let k = [KernelSpec::wave(1).unwrap(), KernelSpec::wave(2).unwrap(), KernelSpec::wave(3).unwrap()][which];
        let p = [x, y, 0.5 * x][..k.dim].to_vec();
        let v = initial_term(k, &data, t, &p).unwrap();
        prop_assert!(v.abs() <= bound(k, &data, t) + 1e-9);
    }

    #[test]
    fn heat_transports_holder_regularity(x in -1.0f64..1.0, h in 1e-3f64..0.2) {
        let alpha = 0.5;
        let data = InitialData::new(Profile::Weierstrass { alpha, amplitude: 1.0, terms: 30 }, DataFn::zero());
        let k = KernelSpec::heat(1).unwrap();
        let a = initial_term(k, &data, 0.05, &[x]).unwrap();
        let b = initial_term(k, &data, 0.05, &[x + h]).unwrap();
        // the Weierstrass sum is Hölder with constant ≤ 2 Σ 2^{-kα}·… ; 8 is a safe bound
        prop_assert!((a - b).abs() <= 8.0 * h.powf(alpha));
    }
}
