//! C-infinity step and bump profiles.

use crate::scalar::{lit, Real};

/// Smooth step: 1 for `t <= 0`, 0 for `t >= 1`, monotone in between.
/// `sharpness` scales the exponent; 1 is the classical `exp(-1/t)` construction.
pub fn step<T: Real>(t: T, sharpness: T) -> T {
    if t <= T::zero() {
        return T::one();
    }
    if t >= T::one() {
        return T::zero();
    }
    let e = sharpness * (T::one() / (T::one() - t) - T::one() / t);
    if e > lit(700.0) {
        return T::zero();
    }
    T::one() / (T::one() + e.exp())
}

/// Derivative of [`step`] in `t`.
pub fn step_derivative<T: Real>(t: T, sharpness: T) -> T {
    if t <= T::zero() || t >= T::one() {
        return T::zero();
    }
    let s = step(t, sharpness);
    let u = T::one() - t;
    -s * (T::one() - s) * sharpness * (T::one() / (u * u) + T::one() / (t * t))
}

/// Radial profile: 1 on `[0, inner]`, 0 beyond `outer`.
pub fn plateau<T: Real>(d: T, inner: T, outer: T, sharpness: T) -> T {
    step((d - inner) / (outer - inner), sharpness)
}

pub fn plateau_derivative<T: Real>(d: T, inner: T, outer: T, sharpness: T) -> T {
    step_derivative((d - inner) / (outer - inner), sharpness) / (outer - inner)
}

/// Periodic hat of half-width `w` centred at 0 on a circle of length `period`.
pub fn periodic_hat<T: Real>(x: T, w: T, period: T) -> T {
    let mut y = x % period;
    if y < T::zero() {
        y = y + period;
    }
    if y > period / lit(2.0) {
        y = period - y;
    }
    (T::one() - y / w).max(T::zero())
}
