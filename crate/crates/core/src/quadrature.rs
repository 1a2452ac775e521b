//! Adaptive Gauss-Kronrod quadrature with helpers for power-law endpoints,
//! algebraic tails and oscillatory tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate { value: 0.0, error: 0.0, evaluations: 0 };

    pub fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }

    pub fn scale(self, c: f64) -> Estimate {
        Estimate { value: c * self.value, error: c.abs() * self.error, evaluations: self.evaluations }
    }
}

/// Tolerances and work budget for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn absolute(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0, max_intervals: 4000 }
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    err
}

/// One 15-point Kronrod rule on `[a, b]`; returns `(value, error, roundoff floor)`.
pub fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut res_g = fc * WG[3];
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = h.abs();
    let err = rescale_error((res_k - res_g) * h, res_abs * h, res_asc * h);
    (res_k * h, err, 50.0 * f64::EPSILON * res_abs * h)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then(o.a.total_cmp(&self.a))
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: &Tolerance) -> Result<Estimate> {
    integrate_breaks(f, &[a, b], tol)
}

/// Globally adaptive integration over consecutive panels `breaks[i]..breaks[i+1]`.
pub fn integrate_breaks<F: Fn(f64) -> f64 + ?Sized>(f: &F, breaks: &[f64], tol: &Tolerance) -> Result<Estimate> {
    if breaks.len() < 2 {
        return Ok(Estimate::ZERO);
    }
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let mut floor_total = 0.0;
    for w in breaks.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e, fl) = gk15(f, w[0], w[1]);
        evals += 15;
        floor_total += fl;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    let budget = tol.max_intervals.max(heap.len() + 1);
    loop {
        let (value, error) = sum_pieces(&heap);
        if !value.is_finite() {
            return Err(Error::Divergent(format!("non-finite integrand value on [{}, {}]", breaks[0], breaks[breaks.len() - 1])));
        }
        if error <= tol.target(value) || error <= 2.0 * floor_total {
            return Ok(Estimate { value, error, evaluations: evals });
        }
        if heap.len() >= budget {
            return Err(Error::BudgetExceeded { partial: value, error });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a).abs() < 1e-15 * worst.a.abs().max(worst.b.abs()) {
            // interval cannot be split further; accept its error as is
            let (value, error) = sum_pieces(&heap);
            let total = Estimate { value: value + worst.value, error: error + worst.error, evaluations: evals };
            if total.error <= 10.0 * tol.target(total.value) {
                return Ok(total);
            }
            return Err(Error::BudgetExceeded { partial: total.value, error: total.error });
        }
        let (v1, e1, _) = gk15(f, worst.a, mid);
        let (v2, e2, _) = gk15(f, mid, worst.b);
        evals += 30;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
}

fn sum_pieces(heap: &BinaryHeap<Piece>) -> (f64, f64) {
    // summation order must not depend on heap layout
    let mut pieces: Vec<&Piece> = heap.iter().collect();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = 0.0;
    let mut error = 0.0;
    for p in pieces {
        value += p.value;
        error += p.error;
    }
    (value, error)
}

/// `∫_0^{r0} r^p g(r) dr` for `p > -1` with the power factor integrated exactly
/// through the substitution `r = r0 u^{1/(p+1)}`.
pub fn integrate_power_origin<F: Fn(f64) -> f64 + ?Sized>(g: &F, p: f64, r0: f64, tol: &Tolerance) -> Result<Estimate> {
    if p <= -1.0 {
        return Err(Error::Divergent(format!("power r^{p} is not integrable at the origin")));
    }
    if r0 <= 0.0 {
        return Ok(Estimate::ZERO);
    }
    let s = 1.0 / (p + 1.0);
    let c = r0.powf(p + 1.0) * s;
    let h = |u: f64| g(r0 * u.powf(s));
    let inner = integrate(&h, 0.0, 1.0, &tol.with_abs(tol.abs / c))?;
    Ok(inner.scale(c))
}

/// `∫_a^∞ f(r) dr` for a non-oscillatory `f` decaying like `r^{-beta}`, `beta > 1`.
/// The map `r = a u^{-1/s}` with `s = min(beta - 1, 1)` flattens the tail.
pub fn integrate_algebraic_tail<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, beta: f64, tol: &Tolerance) -> Result<Estimate> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter("tail start must be positive".into()));
    }
    if beta <= 1.0 {
        return Err(Error::Divergent(format!("tail decaying like r^-{beta} is not integrable")));
    }
    let s = (beta - 1.0).min(1.0);
    let h = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = a * u.powf(-1.0 / s);
        if !r.is_finite() {
            return 0.0;
        }
        f(r) * r / (s * u)
    };
    integrate(&h, 0.0, 1.0, tol)
}

/// `∫_a^∞ amp(r) cos(nu r + phase) dr` for a slowly varying amplitude decaying like `r^{-beta}`.
///
/// For `nu > 0` the range is cut at the zeros of the cosine and the alternating
/// series of panel integrals is summed with repeated averaging of partial sums.
pub fn integrate_fourier_tail<F: Fn(f64) -> f64 + ?Sized>(
    amp: &F,
    nu: f64,
    phase: f64,
    a: f64,
    beta: f64,
    tol: &Tolerance,
) -> Result<Estimate> {
    if nu <= 0.0 {
        let c = phase.cos();
        if c == 0.0 {
            return Ok(Estimate::ZERO);
        }
        let f = |r: f64| amp(r) * c;
        return integrate_algebraic_tail(&f, a, beta, tol);
    }
    const PANELS: usize = 40;
    let f = |r: f64| amp(r) * (nu * r + phase).cos();
    // first zero of cos(nu r + phase) strictly beyond a
    let m0 = ((nu * a + phase - FRAC_PI_2) / PI).floor() + 1.0;
    let zero = |m: f64| (FRAC_PI_2 + m * PI - phase) / nu;
    let panel_tol = tol.with_abs(tol.abs / (4.0 * PANELS as f64));
    let head = integrate(&f, a, zero(m0), &panel_tol)?;
    let mut sums = Vec::with_capacity(PANELS + 1);
    let mut acc = 0.0;
    let mut evals = head.evaluations;
    let mut err = head.error;
    sums.push(acc);
    for j in 0..PANELS {
        let lo = zero(m0 + j as f64);
        let hi = zero(m0 + j as f64 + 1.0);
        let e = integrate(&f, lo, hi, &panel_tol)?;
        acc += e.value;
        evals += e.evaluations;
        err += e.error;
        sums.push(acc);
    }
    // repeated averaging (Euler transform) of the alternating partial sums
    let mut level = sums;
    let mut prev_estimate = f64::NAN;
    while level.len() > 1 {
        prev_estimate = level[level.len() - 1];
        level = level.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    let estimate = level[0];
    let accel_err = (estimate - prev_estimate).abs();
    Ok(Estimate { value: head.value + estimate, error: err + accel_err, evaluations: evals })
}

/// `∫_lo^hi (x - lo)^{a_lo} (hi - x)^{a_hi} g(x) dx` with both power factors
/// integrated exactly near their endpoints.
pub fn integrate_two_sided_power<F: Fn(f64) -> f64 + ?Sized>(
    g: &F,
    lo: f64,
    hi: f64,
    a_lo: f64,
    a_hi: f64,
    tol: &Tolerance,
) -> Result<Estimate> {
    let mid = 0.5 * (lo + hi);
    let half = tol.with_abs(tol.abs / 2.0);
    let left = |r: f64| g(lo + r) * (hi - lo - r).powf(a_hi);
    let right = |r: f64| g(hi - r) * (hi - lo - r).powf(a_lo);
    let l = integrate_power_origin(&left, a_lo, mid - lo, &half)?;
    let r = integrate_power_origin(&right, a_hi, hi - mid, &half)?;
    Ok(l.add(r))
}
