//! Blow-up time of the spatially homogeneous system `u' = v^p1, v' = u^p2`.
//!
//! The system has the first integral
//! `v^{p1+1}/(p1+1) − u^{p2+1}/(p2+1) = K`, so `v` is a function of `u` and
//! `T = ∫_{u0}^∞ du / v(u)^{p1}`. The integral is evaluated with exp-sinh
//! quadrature, which copes with the algebraic tail and with the integrable
//! endpoint singularity when `v0 = 0`.

use std::f64::consts::FRAC_PI_2;

/// `∫_a^∞ dx / y(x)^{pa}` for `x' = y^{pa}`, `y' = x^{pb}`, `x(0) = a`, `y(0) = b`.
fn time_to_infinity(pa: f64, pb: f64, a: f64, b: f64) -> f64 {
    let k = b.powf(pa + 1.0) / (pa + 1.0) - a.powf(pb + 1.0) / (pb + 1.0);
    let expo = -pa / (pa + 1.0);
    let integrand = |x: f64| {
        let base = (pa + 1.0) * (k + x.powf(pb + 1.0) / (pb + 1.0));
        if base <= 0.0 {
            0.0
        } else {
            base.powf(expo)
        }
    };
    exp_sinh(|y| integrand(a + y))
}

/// `∫_0^∞ f(y) dy` via `y = exp(π/2·sinh t)`, refining the step until two
/// successive levels agree to about 1e-13.
fn exp_sinh(f: impl Fn(f64) -> f64) -> f64 {
    let term = |t: f64| {
        let e = (FRAC_PI_2 * t.sinh()).exp();
        let w = FRAC_PI_2 * t.cosh() * e;
        if e == 0.0 || !e.is_finite() {
            return 0.0;
        }
        let val = f(e) * w;
        if val.is_finite() {
            val
        } else {
            0.0
        }
    };
    let t_range: f64 = 6.5;
    let mut h = 0.5;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let count = (t_range / h).ceil() as i64;
        let sum: f64 = (-count..=count).map(|j| term(j as f64 * h)).sum();
        let estimate = sum * h;
        if (estimate - prev).abs() <= 1e-13 * estimate.abs() {
            return estimate;
        }
        prev = estimate;
        h *= 0.5;
    }
    prev
}

/// Blow-up time of `u' = v^p1, v' = u^p2` from `(a_u, a_v)`; infinite for
/// zero data.
pub fn homogeneous_blowup_time(p1: f64, p2: f64, a_u: f64, a_v: f64) -> f64 {
    if a_u > 0.0 {
        time_to_infinity(p1, p2, a_u, a_v)
    } else if a_v > 0.0 {
        time_to_infinity(p2, p1, a_v, a_u)
    } else {
        f64::INFINITY
    }
}
