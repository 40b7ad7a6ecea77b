//! Real special functions: Dawson's integral, erfi, a Gaussian-scaled erfi
//! that never overflows in intermediate steps, and Hermite polynomials.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Largest exponent whose exponential is a finite f64.
pub fn max_exponent() -> f64 {
    f64::MAX.ln()
}

/// |x| above which e^{x²} is not representable; erfi reports overflow there.
pub fn erfi_overflow_threshold() -> f64 {
    max_exponent().sqrt()
}

/// Highest supported Hermite degree.
pub const HERMITE_MAX_DEGREE: usize = 128;

/// Dawson's integral D(x) = e^{−x²}∫₀ˣ e^{t²} dt.
///
/// Power series below 1, Rybicki's sampling formula up to 10, and the
/// asymptotic expansion beyond. Relative accuracy is about 1e-15 throughout.
pub fn dawson(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1.0 {
        dawson_series(x)
    } else if ax <= 10.0 {
        dawson_rybicki(x)
    } else {
        dawson_asymptotic(x)
    }
}

fn dawson_series(x: f64) -> f64 {
    // All terms positive: x^{2k+1}/(k!(2k+1)).
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for k in 1..200 {
        term *= x2 / k as f64;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    (-x2).exp() * sum
}

// Rybicki: D(x) ≈ π^{-1/2} Σ_{n odd} e^{−(x'−nh)²}/(n + n0) with x = x' + n0·h.
// The discretisation error is of order e^{−(π/2h)²} ≈ 1e-27 for h = 0.2.
fn dawson_rybicki(x: f64) -> f64 {
    const H: f64 = 0.2;
    const TERMS: usize = 20;
    let ax = x.abs();
    let n0 = 2.0 * (0.5 * ax / H).round();
    let xp = ax - n0 * H;
    let mut sum = 0.0;
    for i in 0..TERMS {
        let n = (2 * i + 1) as f64;
        let up = xp - n * H;
        let down = xp + n * H;
        sum += (-up * up).exp() / (n0 + n) + (-down * down).exp() / (n0 - n);
    }
    x.signum() * sum / PI.sqrt()
}

fn dawson_asymptotic(x: f64) -> f64 {
    // D(x) ~ 1/(2x) Σ (2k−1)!!/(2x²)^k
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let next = term * (2 * k - 1) as f64 * inv;
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * x)
}

/// Imaginary error function erfi(x) = erf(ix)/i.
pub fn erfi(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Overflow(format!("erfi of non-finite argument {x}")));
    }
    if x.abs() > erfi_overflow_threshold() {
        return Err(Error::Overflow(format!(
            "erfi({x}) exceeds the representable range (|x| <= {:.4})",
            erfi_overflow_threshold()
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let v = TWO_OVER_SQRT_PI * (x * x).exp() * dawson(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("erfi({x}) is not representable")))
    }
}

/// e^{−E}·erfi(y) evaluated as (2/√π)e^{y²−E}D(y).
pub fn gauss_erfi(gauss_exponent: f64, y: f64) -> Result<f64> {
    if !(gauss_exponent.is_finite() && y.is_finite()) {
        return Err(Error::Overflow(format!("gauss_erfi({gauss_exponent}, {y})")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let e = y * y - gauss_exponent;
    if e > max_exponent() {
        return Err(Error::Overflow(format!("exp(y^2 - E) with y^2 - E = {e:.3} is not representable")));
    }
    Ok(TWO_OVER_SQRT_PI * e.exp() * dawson(y))
}

/// Physicists' Hermite polynomial H_n(x).
pub fn hermite(n: usize, x: f64) -> f64 {
    assert!(n <= HERMITE_MAX_DEGREE, "Hermite degree {n} above {HERMITE_MAX_DEGREE}");
    let mut h0 = 1.0;
    if n == 0 {
        return h0;
    }
    let mut h1 = 2.0 * x;
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Orthonormal Hermite function ψ_n(x) = H_n(x)e^{−x²/2}/√(2ⁿn!√π).
///
/// Uses the normalised three-term recurrence, so neither the factorial nor the
/// raw polynomial is ever formed and large n or |x| cannot overflow.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut p0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n == 0 {
        return p0;
    }
    let mut p1 = std::f64::consts::SQRT_2 * x * p0;
    for k in 1..n {
        let kf = k as f64;
        let p2 = (2.0 / (kf + 1.0)).sqrt() * x * p1 - (kf / (kf + 1.0)).sqrt() * p0;
        p0 = p1;
        p1 = p2;
    }
    p1
}
