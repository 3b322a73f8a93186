//! Quadrature rules and the cosine/sine integrals.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(z) and its derivative.
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` with `panels` equal Gauss–Legendre panels of `n` nodes.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * f(mid + 0.5 * h * xi);
        }
    }
    0.5 * h * acc
}

/// `S[j][l] = ∫_{x_j}^{1} ℓ_l(s) ds` for the Lagrange basis on the nodes `x`.
/// Applied to samples of a smooth function this yields the integral from
/// each node to the right end of the interval.
pub fn tail_integration_matrix(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let (gx, gw) = gauss_legendre(n);
    let lagrange = |l: usize, s: f64| -> f64 {
        let mut v = 1.0;
        for (m, &xm) in x.iter().enumerate() {
            if m != l {
                v *= (s - xm) / (x[l] - xm);
            }
        }
        v
    };
    (0..n)
        .map(|j| {
            let (a, b) = (x[j], 1.0);
            (0..n)
                .map(|l| {
                    let mut acc = 0.0;
                    for (gxi, gwi) in gx.iter().zip(&gw) {
                        acc += gwi * lagrange(l, 0.5 * (a + b) + 0.5 * (b - a) * gxi);
                    }
                    0.5 * (b - a) * acc
                })
                .collect()
        })
        .collect()
}

/// `(Ci(x), Si(x))`, series below 2 and a continued fraction above.
pub fn cisi(x: f64) -> (f64, f64) {
    let t = x.abs();
    if t == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let (ci, si) = if t > 2.0 {
        let mut b = Complex64::new(1.0, t);
        let mut c = Complex64::new(1e300, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 2..2000 {
            let a = -((i - 1) as f64).powi(2);
            b += 2.0;
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
                break;
            }
        }
        h *= Complex64::new(t.cos(), -t.sin());
        (-h.re, FRAC_PI_2 + h.im)
    } else {
        let (mut sum_c, mut sum_s) = (0.0, 0.0);
        let mut term = 1.0;
        for k in 1..60 {
            term *= t / k as f64;
            let v = term / k as f64;
            match k % 4 {
                1 => sum_s += v,
                2 => sum_c -= v,
                3 => sum_s -= v,
                _ => sum_c += v,
            }
            if v < 1e-18 * (sum_s.abs() + sum_c.abs()).max(1e-300) {
                break;
            }
        }
        (EULER_GAMMA + t.ln() + sum_c, sum_s)
    };
    (ci, if x < 0.0 { -si } else { si })
}

/// `∫_t^T e^{-iτφ} / τ dτ` in closed form, for `0 < t < T`.
pub fn log_phase_integral(t: f64, big_t: f64, phi: f64) -> Complex64 {
    if phi == 0.0 {
        return Complex64::new((big_t / t).ln(), 0.0);
    }
    let a = phi.abs();
    let (c1, s1) = cisi(a * t);
    let (c2, s2) = cisi(a * big_t);
    // For tiny arguments Ci is dominated by the logarithm; take its
    // difference analytically so the result keeps full precision.
    let dc = if a * big_t <= 2.0 { (big_t / t).ln() + (c2 - (a * big_t).ln()) - (c1 - (a * t).ln()) } else { c2 - c1 };
    Complex64::new(dc, -phi.signum() * (s2 - s1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_high_degree() {
        for n in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn tail_matrix_integrates_polynomials() {
        let (x, _) = gauss_legendre(8);
        let s = tail_integration_matrix(&x);
        for j in 0..8 {
            let v: f64 = (0..8).map(|l| s[j][l] * x[l].powi(5)).sum();
            let exact = (1.0 - x[j].powi(6)) / 6.0;
            assert!((v - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn cisi_reference_values() {
        // Abramowitz & Stegun table 5.1.
        let (ci, si) = cisi(1.0);
        assert!((si - 0.946_083_070_367_183).abs() < 1e-14);
        assert!((ci - 0.337_403_922_900_968).abs() < 1e-14);
        let (ci, si) = cisi(10.0);
        assert!((si - 1.658_347_594_218_874).abs() < 1e-14);
        assert!((ci + 0.045_456_433_004_455).abs() < 1e-14);
    }

    #[test]
    fn cisi_branches_agree_near_switch() {
        for &x in &[1.999_999_9, 2.000_000_1] {
            let (c, s) = cisi(x);
            let si = integrate(|u| if u == 0.0 { 1.0 } else { u.sin() / u }, 0.0, x, 20, 16);
            assert!((s - si).abs() < 1e-14);
            let ci = EULER_GAMMA + x.ln() + integrate(|u| (u.cos() - 1.0) / u, 0.0, x, 20, 16);
            assert!((c - ci).abs() < 1e-14);
        }
    }

    #[test]
    fn log_phase_integral_matches_quadrature() {
        for &(t, tt, phi) in &[(1.0, 3.0, 0.7), (5.0, 80.0, -0.05), (2.0, 4.0, 1e-9), (10.0, 11.0, 3.0)] {
            let got = log_phase_integral(t, tt, phi);
            let re = integrate(|s| (s * phi).cos() / s, t, tt, 400, 16);
            let im = integrate(|s| -(s * phi).sin() / s, t, tt, 400, 16);
            assert!((got - Complex64::new(re, im)).norm() < 1e-13, "{t} {tt} {phi}: {got}");
        }
    }
}
