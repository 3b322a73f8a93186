//! The Airy function.
//!
//! `ai` is the standard `Ai(x) = (1/π)∫_0^∞ cos(s³/3 + x s) ds`. The kernel
//! of the cubic dispersion uses the Fourier normalization
//! `(2π)^{-1/2} ∫ e^{i(zξ+ξ³)} dξ = √(2π)·3^{-1/3}·Ai(3^{-1/3} z)`, see [`ai_fourier`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::quad::gauss_legendre;

/// `Ai(0) = 3^{-2/3} / Γ(2/3)`.
pub const AI0: f64 = 0.355_028_053_887_817_2;
/// `-Ai'(0) = 3^{-1/3} / Γ(1/3)`.
pub const AIP0: f64 = 0.258_819_403_792_806_8;

const SERIES_MAX: f64 = 2.0;
const ASYMPTOTIC_MIN: f64 = 8.0;

/// Standard Airy function.
pub fn ai(x: f64) -> f64 {
    if x.abs() <= SERIES_MAX {
        ai_series(x)
    } else if x.abs() < ASYMPTOTIC_MIN {
        ai_ray(x)
    } else {
        ai_asymptotic(x)
    }
}

/// Maclaurin series `Ai = Ai(0)·f(x) + Ai'(0)·g(x)`.
pub fn ai_series(x: f64) -> f64 {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 0..200 {
        let k = k as f64;
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs() && tg.abs() < 1e-18 * g.abs().max(1e-300) {
            break;
        }
    }
    AI0 * f - AIP0 * g
}

fn ray_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(20))
}

/// Steepest-descent rotation of the defining contour onto the ray
/// `t = r e^{iπ/3}`: `Ai(x) = (1/π) Im[e^{iπ/3} ∫_0^∞ exp(-r³/3 - x r e^{iπ/3}) dr]`.
pub fn ai_ray(x: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, PI / 3.0);
    // Beyond this radius the integrand is below e^{-45}.
    let mut r_max = 1.0;
    while r_max * r_max * r_max / 3.0 + 0.5 * x * r_max < 45.0 {
        r_max += 0.25;
    }
    let panels = (r_max * (4.0 + x.abs())).ceil() as usize;
    let (nodes, weights) = ray_rule();
    let h = r_max / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (xi, wi) in nodes.iter().zip(weights) {
            let r = mid + 0.5 * h * xi;
            acc += (-(r * r * r) / 3.0 - x * r * rot).exp() * (wi * 0.5 * h);
        }
    }
    (rot * acc).im / PI
}

fn u_coeffs() -> &'static [f64] {
    static U: OnceLock<Vec<f64>> = OnceLock::new();
    U.get_or_init(|| {
        let mut u = vec![1.0];
        for k in 1..40 {
            let kf = k as f64;
            let prev = u[k - 1];
            u.push(prev * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / (216.0 * kf * (2.0 * kf - 1.0)));
        }
        u
    })
}

/// Large-argument expansions, truncated at the smallest term.
pub fn ai_asymptotic(x: f64) -> f64 {
    let u = u_coeffs();
    let z = x.abs();
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    if x > 0.0 {
        let (mut sum, mut term_prev) = (0.0, f64::INFINITY);
        let mut pow = 1.0;
        for (k, uk) in u.iter().enumerate() {
            let term = uk / pow;
            if term > term_prev || term < 1e-17 {
                break;
            }
            sum += if k % 2 == 0 { term } else { -term };
            term_prev = term;
            pow *= zeta;
        }
        (-zeta).exp() / (2.0 * PI.sqrt() * z.powf(0.25)) * sum
    } else {
        let (mut p, mut q) = (0.0, 0.0);
        let mut term_prev = f64::INFINITY;
        let mut pow = 1.0;
        for (k, uk) in u.iter().enumerate() {
            let term = uk / pow;
            if term > term_prev || term < 1e-17 {
                break;
            }
            // Even orders build P, odd orders Q, with alternating signs per pair.
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += sign * term;
            } else {
                q += sign * term;
            }
            term_prev = term;
            pow *= zeta;
        }
        let ph = zeta + PI / 4.0;
        (ph.sin() * p - ph.cos() * q) / (PI.sqrt() * z.powf(0.25))
    }
}

/// `(2π)^{-1/2} ∫ e^{i(zξ+ξ³)} dξ`.
pub fn ai_fourier(z: f64) -> f64 {
    let c = 3f64.powf(-1.0 / 3.0);
    (2.0 * PI).sqrt() * c * ai(c * z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_values() {
        assert!((ai(0.0) - AI0).abs() < 1e-16);
        // Γ(2/3) = 1.354117939426400...
        assert!((AI0 - 3f64.powf(-2.0 / 3.0) / 1.354_117_939_426_400_4).abs() < 1e-15);
    }

    #[test]
    fn branches_agree_on_overlaps() {
        for i in 0..=40 {
            let x = -7.5 + 15.0 * i as f64 / 40.0;
            if x.abs() >= 1.0 {
                let d = (ai_ray(x) - ai_series(x)).abs();
                if x.abs() <= 4.0 {
                    assert!(d < 1e-13, "series/ray at {x}: {d}");
                }
            }
        }
        for &x in &[-12.0, -9.0, -7.0, 7.0, 9.0] {
            let d = (ai_ray(x) - ai_asymptotic(x)).abs();
            assert!(d < 1e-11, "ray/asymptotic at {x}: {d}");
        }
    }

    #[test]
    fn tabulated_values() {
        // Abramowitz & Stegun table 10.11.
        assert!((ai(1.0) - 0.135_292_416_312_881).abs() < 1e-14);
        assert!((ai(-1.0) - 0.535_560_883_292_352).abs() < 1e-14);
        assert!((ai(5.0) - 1.083_444_281_360_744e-4).abs() < 1e-17);
        assert!((ai(-5.0) - 0.350_761_009_024_114).abs() < 1e-13);
        assert!((ai(10.0) - 1.104_753_255_289_869_9e-10).abs() < 1e-21);
    }
}
