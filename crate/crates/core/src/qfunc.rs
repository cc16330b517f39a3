//! Gaussian tail probability and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// `Q(x) = P(Z > x)` for a standard normal `Z`, computed as `erfc(x/√2)/2`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_function`] on `(0, 1)`.
///
/// Newton iteration on `ln Q(x) - ln y`, safeguarded by a bisection bracket.
/// The result satisfies `|Q(x) - y| <= 1e-12·y` whenever `y` is a normal
/// float.
pub fn q_inverse(y: f64) -> Result<f64> {
    if !(y > 0.0 && y < 1.0) {
        return Err(Error::param("y", format!("tail probability must lie in (0, 1), got {y}")));
    }
    if y == 0.5 {
        return Ok(0.0);
    }
    if y > 0.5 {
        // 1 - y is exact here.
        return q_inverse(1.0 - y).map(|x| -x);
    }
    Ok(upper_tail_inverse(y))
}

fn upper_tail_inverse(y: f64) -> f64 {
    const TOL: f64 = 1e-14;
    let target = y.ln();

    // Bracket: Q(0) = 0.5 >= y, Q(40) underflows to 0 < y.
    let (mut lo, mut hi) = (0.0_f64, 40.0_f64);
    let mut x = initial_guess(y).clamp(lo, hi);

    for _ in 0..200 {
        let q = q_function(x);
        if (q - y).abs() <= TOL * y {
            return x;
        }
        if q > y {
            lo = x;
        } else {
            hi = x;
        }
        let next = if q > 0.0 {
            // d/dx ln Q(x) = -φ(x)/Q(x)
            let slope = -normal_pdf(x) / q;
            x - (q.ln() - target) / slope
        } else {
            f64::NAN
        };
        x = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    x
}

/// Rational approximation for the upper tail, absolute error below 5e-4.
fn initial_guess(y: f64) -> f64 {
    let t = (-2.0 * y.ln()).sqrt();
    let num = 2.515517 + t * (0.802853 + t * 0.010328);
    let den = 1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308));
    t - num / den
}
