//! Scalar constants that govern the reverse and interpolation inequalities:
//! the generalized Kantorovich constant `K(h, p)`, the Specht ratio `S(h)`, and
//! the two Mond–Pečarić gap bounds `β(m, M, α)` and `γ(m, M, r, α)`.
//!
//! Products and powers are evaluated in the log domain; `h^p − 1` and `h^p − h`
//! go through `expm1` so that `h` close to 1 does not cancel catastrophically.

use crate::error::{MeansError, Result};

/// `|h − 1|` below which `K` and `S` are replaced by their limit value 1.
pub const H_GUARD: f64 = 1e-8;
/// `|p|` or `|p − 1|` below which `K(h, p)` is replaced by its limit value 1.
pub const P_GUARD: f64 = 1e-10;

fn check_h(h: f64) -> Result<()> {
    if !(h >= 1.0) || !h.is_finite() {
        return Err(MeansError::validation(format!("condition ratio h must be >= 1, got {h}")));
    }
    Ok(())
}

fn check_bounds(m: f64, big_m: f64) -> Result<()> {
    if !(m > 0.0) || !(big_m > m) || !big_m.is_finite() {
        return Err(MeansError::validation(format!(
            "bounds need 0 < m < M, got m = {m}, M = {big_m}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(MeansError::validation(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// `ln |e^x − 1|` without overflow for large `x`.
fn ln_abs_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().abs().ln()
    }
}

/// Generalized Kantorovich constant
/// `K(h,p) = (h^p − h)/((p−1)(h−1)) · ((p−1)/p · (h^p−1)/(h^p−h))^p`.
///
/// `K(h, 0) = K(h, 1) = K(1, p) = 1` by continuity.
pub fn kantorovich(h: f64, p: f64) -> Result<f64> {
    check_h(h)?;
    if !p.is_finite() {
        return Err(MeansError::validation(format!("exponent p must be finite, got {p}")));
    }
    if (h - 1.0).abs() < H_GUARD || p.abs() < P_GUARD || (p - 1.0).abs() < P_GUARD {
        return Ok(1.0);
    }
    let l = h.ln();
    let ln_hp_minus_1 = ln_abs_expm1(p * l);
    // h^p − h = h (h^{p−1} − 1)
    let ln_hp_minus_h = l + ln_abs_expm1((p - 1.0) * l);
    let ln_p1 = (p - 1.0).abs().ln();
    let ln_first = ln_hp_minus_h - ln_p1 - (h - 1.0).ln();
    let ln_inner = ln_p1 - p.abs().ln() + ln_hp_minus_1 - ln_hp_minus_h;
    Ok((ln_first + p * ln_inner).exp())
}

/// The classical Kantorovich constant `(M + m)² / (4Mm) = K(M/m, 2)`.
pub fn kantorovich_classic(m: f64, big_m: f64) -> f64 {
    (big_m + m).powi(2) / (4.0 * big_m * m)
}

/// Specht ratio `S(h) = (h−1) h^{1/(h−1)} / (e log h)`, `S(1) = 1`.
pub fn specht(h: f64) -> Result<f64> {
    check_h(h)?;
    if (h - 1.0).abs() < H_GUARD {
        return Ok(1.0);
    }
    let l = h.ln();
    Ok(((h - 1.0).ln() + l / (h - 1.0) - 1.0 - l.ln()).exp())
}

/// `β(m, M, α) = max_{t∈[m,M]} t − α Mm / (M + m − t)`, in closed form.
pub fn beta(m: f64, big_m: f64, alpha: f64) -> Result<f64> {
    check_bounds(m, big_m)?;
    check_alpha(alpha)?;
    let s = (alpha * big_m * m).sqrt();
    Ok(if s < m {
        (1.0 - alpha) * big_m
    } else if s > big_m {
        (1.0 - alpha) * m
    } else {
        big_m + m - 2.0 * s
    })
}

/// Which piece of a three-branch gap bound was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Interior,
    Upper,
    Lower,
}

/// `γ(m, M, r, α)`: the extremum over `t ∈ [m, M]` of `ℓ(t) − α t^r`, where `ℓ` is the chord
/// of `t ↦ t^r` through `(m, m^r)` and `(M, M^r)`. Maximum for `r ∉ [0, 1]`, minimum for
/// `r ∈ (0, 1)`; both are given by the same piecewise expression.
pub fn gamma(m: f64, big_m: f64, r: f64, alpha: f64) -> Result<f64> {
    gamma_with_branch(m, big_m, r, alpha).map(|(v, _)| v)
}

pub fn gamma_with_branch(m: f64, big_m: f64, r: f64, alpha: f64) -> Result<(f64, Branch)> {
    check_bounds(m, big_m)?;
    check_alpha(alpha)?;
    if !r.is_finite() || r == 0.0 || r == 1.0 {
        return Err(MeansError::domain(format!(
            "gamma needs r outside {{0, 1}} (exponent singularity), got r = {r}"
        )));
    }
    let (mr, big_mr) = (m.powf(r), big_m.powf(r));
    let c = (big_mr - mr) / (alpha * r * (big_m - m));
    let t_star = c.powf(1.0 / (r - 1.0));
    Ok(if t_star > big_m {
        ((1.0 - alpha) * big_mr, Branch::Upper)
    } else if t_star < m {
        ((1.0 - alpha) * mr, Branch::Lower)
    } else {
        let intercept = (big_m * mr - m * big_mr) / (big_m - m);
        (alpha * (r - 1.0) * c.powf(r / (r - 1.0)) + intercept, Branch::Interior)
    })
}

/// `ln K(h, −r) − r ln K(h, −1)`; negative on `(0, 1)` and positive outside it.
pub fn kantorovich_logconvexity_gap(h: f64, r: f64) -> Result<f64> {
    Ok(kantorovich(h, -r)?.ln() - r * kantorovich(h, -1.0)?.ln())
}

/// `K(h,−r) ≤ K(h,−1)^r` for `r ∈ (0,1)` and `K(h,−r) ≥ K(h,−1)^r` otherwise.
pub fn kantorovich_logconvexity_check(h: f64, r: f64) -> bool {
    const SLACK: f64 = 1e-12;
    match kantorovich_logconvexity_gap(h, r) {
        Ok(gap) if r > 0.0 && r < 1.0 => gap <= SLACK,
        Ok(gap) => gap >= -SLACK,
        Err(_) => false,
    }
}
