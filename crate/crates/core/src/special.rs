//! Special functions used across the crate.

use std::f64::consts::{FRAC_PI_4, PI};

pub use statrs::function::erf::{erf, erfc};
pub use statrs::function::gamma::gamma;

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Mass of a centred Gaussian with variance `var` on the interval `[a, b]`.
pub fn gaussian_interval_mass(a: f64, b: f64, var: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    // use the tail that avoids cancellation
    if a >= 0.0 {
        0.5 * (erfc(a / s) - erfc(b / s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b / s) - erfc(-a / s))
    } else {
        0.5 * (erf(b / s) - erf(a / s))
    }
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

const HANKEL_TERMS: usize = 10;
const J0_ASYMPTOTIC_FROM: f64 = 25.0;

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z < J0_ASYMPTOTIC_FROM {
        // trapezoid rule on the periodic integral representation is spectrally accurate
        const N: usize = 64;
        let mut s = 0.0;
        for i in 0..N {
            let th = PI * (i as f64 + 0.5) / N as f64;
            s += (z * th.sin()).cos();
        }
        s / N as f64
    } else {
        let (p, q) = hankel_pq(z);
        let w = z - FRAC_PI_4;
        (2.0 / (PI * z)).sqrt() * (p * w.cos() - q * w.sin())
    }
}

/// Amplitudes `(P, Q)` of the large-argument expansion
/// `J0(z) = sqrt(2/(pi z)) (P cos(z - pi/4) - Q sin(z - pi/4))`.
pub fn hankel_pq(z: f64) -> (f64, f64) {
    let mut a = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut zk = 1.0;
    for k in 1..=2 * HANKEL_TERMS {
        let m = (2 * k - 1) as f64;
        a *= -(m * m) / (8.0 * k as f64);
        zk *= z;
        let term = a / zk;
        // sign pattern (-1)^floor(k/2)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
    }
    (p, q)
}

/// Whether `bessel_j0` uses its asymptotic branch at `z`.
pub fn j0_is_asymptotic(z: f64) -> bool {
    z.abs() >= J0_ASYMPTOTIC_FROM
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `(2x - sin 2x) / 4`, accurate for small x.
pub fn half_x_minus_sin2x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        // x^3/3 - x^5/15 + 2x^7/315 - x^9/2835 + 2x^11/155925
        x * x2
            * (1.0 / 3.0
                + x2 * (-1.0 / 15.0 + x2 * (2.0 / 315.0 + x2 * (-1.0 / 2835.0 + x2 * 2.0 / 155925.0))))
    } else {
        (2.0 * x - (2.0 * x).sin()) / 4.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_known_values() {
        // values from standard tables
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j0(10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-13);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-14);
    }

    #[test]
    fn j0_branches_agree() {
        for &z in &[25.0, 30.0, 47.3] {
            let n = 4000;
            let mut s = 0.0;
            for i in 0..n {
                let th = PI * (i as f64 + 0.5) / n as f64;
                s += (z * th.sin()).cos();
            }
            assert!((bessel_j0(z) - s / n as f64).abs() < 1e-11, "z = {z}");
        }
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn small_angle_series_matches_direct() {
        // the direct formula cancels catastrophically for small x, so compare relatively
        for &x in &[0.09, 0.05, 0.2] {
            let direct = (2.0 * x - (2.0 * x as f64).sin()) / 4.0;
            assert!((half_x_minus_sin2x(x) - direct).abs() < 1e-11 * direct);
        }
    }
}
