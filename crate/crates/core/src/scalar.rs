//! Scalar reference implementations of the n-variable means.
//!
//! These use closed forms or bisection, never the matrix fixed-point solver,
//! so they serve as independent oracles for commuting (diagonal) instances.

use crate::means2::MeanTwo;
use crate::means_n::BaseMean;

pub fn arithmetic_mean(w: &[f64], a: &[f64]) -> f64 {
    w.iter().zip(a).map(|(w, a)| w * a).sum()
}

pub fn harmonic_mean(w: &[f64], a: &[f64]) -> f64 {
    1.0 / w.iter().zip(a).map(|(w, a)| w / a).sum::<f64>()
}

pub fn base_mean(base: BaseMean, w: &[f64], a: &[f64]) -> f64 {
    match base {
        BaseMean::Arithmetic => arithmetic_mean(w, a),
        BaseMean::Harmonic => harmonic_mean(w, a),
    }
}

/// `exp(∑ ωⱼ log aⱼ)`: the scalar Karcher and Log-Euclidean mean.
pub fn geometric_mean(w: &[f64], a: &[f64]) -> f64 {
    w.iter().zip(a).map(|(w, a)| w * a.ln()).sum::<f64>().exp()
}

/// `(∑ ωⱼ aⱼ^α)^{1/α}` for `α ≠ 0`.
pub fn power_mean(w: &[f64], alpha: f64, a: &[f64]) -> f64 {
    w.iter().zip(a).map(|(w, a)| w * a.powf(alpha)).sum::<f64>().powf(1.0 / alpha)
}

/// Scalar deformed mean: the root `x` of `𝔐(f_σ(a₁/x), …, f_σ(aₙ/x)) = 1`.
///
/// The left side is strictly decreasing in `x`, and the root lies in `[min a, max a]`,
/// so plain bisection converges to the last representable bit.
pub fn deformed_mean(base: BaseMean, w: &[f64], sigma: &MeanTwo, a: &[f64]) -> f64 {
    let mut lo = a.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return lo;
    }
    let excess = |x: f64| {
        let images: Vec<f64> = a.iter().map(|aj| sigma.repr(aj / x)).collect();
        base_mean(base, w, &images) - 1.0
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
