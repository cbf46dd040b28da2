//! `libm` shims so results are identical with and without `std`.

pub(crate) use core::f64::consts::{PI, TAU};

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
#[inline]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}
#[inline]
pub(crate) fn cos(x: f64) -> f64 {
    libm::cos(x)
}
#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}
#[inline]
pub(crate) fn abs(x: f64) -> f64 {
    libm::fabs(x)
}
#[inline]
pub(crate) fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

/// Reduces an angle to `[0, 2π)`.
pub(crate) fn wrap_angle(t: f64) -> f64 {
    let r = t - TAU * libm::floor(t / TAU);
    if r >= TAU || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Smallest double strictly greater than a finite non-negative `x`.
pub(crate) fn next_up(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    if x == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Largest double strictly smaller than a finite positive `x`.
pub(crate) fn next_down(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    f64::from_bits(x.to_bits() - 1)
}
