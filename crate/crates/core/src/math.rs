//! Floating point helpers backed by `libm` so results do not depend on the
//! platform's C math library.

use core::f64::consts::{PI, TAU};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

const SIGN: u64 = 1 << 63;

/// `exp(y)` for `y ∈ [-81, 0]` by range reduction to `|r| ≤ ln2/2` and a
/// degree-13 Taylor polynomial. Branch-free so slice loops vectorise.
#[inline(always)]
fn exp_nonpositive(y: f64) -> f64 {
    const SHIFT: f64 = 6_755_399_441_055_744.0; // 1.5 · 2^52
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    let kk = y * core::f64::consts::LOG2_E + SHIFT;
    let k = kk - SHIFT;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    for c in [
        1.0 / 479_001_600.0,
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    // The low mantissa bits of `kk` hold `k`; shift `k + 1023` into the exponent.
    let scale = f64::from_bits(kk.to_bits().wrapping_add(1023) << 52);
    p * scale
}

/// Hyperbolic tangent with absolute error below `1e-15`, used by the
/// networks. Propagates NaN.
#[inline(always)]
pub fn tanh_fast(x: f64) -> f64 {
    let a = f64::from_bits(x.to_bits() & !SIGN);
    let a = if a > 40.0 { 40.0 } else { a };
    let t = exp_nonpositive(-2.0 * a);
    let r = (1.0 - t) / (1.0 + t);
    f64::from_bits(r.to_bits() | (x.to_bits() & SIGN))
}

pub fn tanh_in_place(v: &mut [f64]) {
    for x in v {
        *x = tanh_fast(*x);
    }
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn atan2(y: f64, x: f64) -> f64 {
    libm::atan2(y, x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn hypot(x: f64, y: f64) -> f64 {
    libm::hypot(x, y)
}

#[inline]
pub fn powi(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_two_pi(theta: f64) -> f64 {
    if (0.0..TAU).contains(&theta) {
        return theta;
    }
    let mut w = theta - TAU * libm::floor(theta / TAU);
    if w >= TAU {
        w -= TAU;
    }
    if w < 0.0 {
        w = 0.0;
    }
    w
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_pi(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let w = wrap_two_pi(theta + PI) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}
