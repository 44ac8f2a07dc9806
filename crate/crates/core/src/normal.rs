//! Standard normal density and distribution function.
//!
//! The distribution function goes through `erfc`, which keeps full relative
//! precision in the lower tail where `1 + erf(x)` would cancel.

use std::f64::consts::FRAC_1_SQRT_2;

/// Arguments of [`cdf`] are clamped to this magnitude.
pub const CDF_CLAMP: f64 = 40.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal distribution function Φ.
#[inline]
pub fn cdf(x: f64) -> f64 {
    let x = x.clamp(-CDF_CLAMP, CDF_CLAMP);
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density φ.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Logistic sigmoid, evaluated without overflow for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
