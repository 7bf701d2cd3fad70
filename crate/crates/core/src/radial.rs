//! Radial Fourier transforms and the closed-form pieces used by them.
//!
//! Convention: for a radial function `h` on R^3,
//! `ĥ(p) = ∫ h(x) e^{-ip·x} dx = 4π ∫ r² h(r) sinc(|p| r) dr`.

use std::f64::consts::PI;

use crate::error::Result;
use crate::quadrature::{integrate_pieces, QuadConfig};

/// `sin(x)/x`, with a Taylor branch near zero.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

/// `(sin x − x cos x)/x³`, equal to `j₁(x)/x`; tends to 1/3 at the origin.
pub fn j1_over_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1.0 {
        // Σ_{n≥1} (−1)^{n+1} 2n x^{2n−2} / (2n+1)!
        let x2 = x * x;
        let mut term = 2.0 / 6.0; // n = 1
        let mut sum = term;
        let mut n = 1.0;
        loop {
            // ratio of successive terms: −x² (n+1)/n / ((2n+2)(2n+3))
            term *= -x2 * (n + 1.0) / n / ((2.0 * n + 2.0) * (2.0 * n + 3.0));
            sum += term;
            n += 1.0;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (x.sin() - x * x.cos()) / (x * x * x)
    }
}

/// Fourier transform of the indicator of the ball of radius `radius`.
pub fn ball_hat(radius: f64, p: f64) -> f64 {
    4.0 * PI * radius.powi(3) * j1_over_x(p * radius)
}

/// `∫_a^b r² sinc(p r) dr`.
pub fn r2_sinc_integral(a: f64, b: f64, p: f64) -> f64 {
    b.powi(3) * j1_over_x(p * b) - a.powi(3) * j1_over_x(p * a)
}

/// `∫_a^b cos(c r) dr`, stable for `c → 0`.
#[inline]
pub fn cos_integral(c: f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    2.0 * h * (c * m).cos() * sinc(c * h)
}

/// `∫_a^b sin(c r) dr`, stable for `c → 0`.
#[inline]
pub fn sin_integral(c: f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (a + b);
    2.0 * h * (c * m).sin() * sinc(c * h)
}

/// `4π ∫_a^b r² · (A sin(k r) + B cos(k r))/r · sinc(p r) dr`.
///
/// This is the transform of the free radial solution `u(r)/r` between two
/// radii. Falls back to quadrature when `p·b` is too small for the closed
/// form to keep its digits.
pub fn trig_over_r_hat(amp_sin: f64, amp_cos: f64, k: f64, a: f64, b: f64, p: f64) -> f64 {
    if p * b < 0.05 {
        let f = |r: f64| r * (amp_sin * (k * r).sin() + amp_cos * (k * r).cos()) * sinc(p * r);
        let v = integrate_pieces(f, &[a, b], &QuadConfig::with_abs_tol(1e-16))
            .expect("smooth integrand on a short interval");
        return 4.0 * PI * v;
    }
    let s_part = 0.5 * (cos_integral(k - p, a, b) - cos_integral(k + p, a, b));
    let c_part = 0.5 * (sin_integral(p + k, a, b) + sin_integral(p - k, a, b));
    4.0 * PI * (amp_sin * s_part + amp_cos * c_part) / p
}

/// Radial transform of an arbitrary integrand `h(r)` over consecutive
/// pieces, by adaptive quadrature.
pub fn radial_transform<F: Fn(f64) -> f64>(h: F, breaks: &[f64], p: f64, cfg: &QuadConfig) -> Result<f64> {
    let v = integrate_pieces(|r| r * r * h(r) * sinc(p * r), breaks, cfg)?;
    Ok(4.0 * PI * v)
}

/// `4π|p| ∫ r² φ(r) j₁(p r) dr`: the transform of `∇·(φ(r) r̂)`.
pub fn divergence_hat<F: Fn(f64) -> f64>(phi: F, breaks: &[f64], p: f64, cfg: &QuadConfig) -> Result<f64> {
    let v = integrate_pieces(
        |r| {
            let x = p * r;
            // j₁(x) = x · j1_over_x(x)
            r * r * phi(r) * x * j1_over_x(x)
        },
        breaks,
        cfg,
    )?;
    Ok(4.0 * PI * p * v)
}
