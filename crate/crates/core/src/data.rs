//! Smooth test data: spectral windows, band-pass profiles and bumps.

use std::sync::Arc;

use num_complex::Complex64;

use crate::grid::{forward, Grid, RealField, SpectralField};

/// C^∞ transition from 0 at `u <= 0` to 1 at `u >= 1`.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / u).exp();
        let b = (-1.0 / (1.0 - u)).exp();
        a / (a + b)
    }
}

/// 1 for `|k| <= a`, 0 for `|k| >= b`, smooth in between.
pub fn window(k: f64, a: f64, b: f64) -> f64 {
    1.0 - smoothstep((k.abs() - a) / (b - a))
}

/// Per-axis band: 0 for `|k| <= gap_lo`, rising to 1 at `gap_hi`, flat to
/// `flat`, gone at `cut`.
pub fn band(k: f64, gap_lo: f64, gap_hi: f64, flat: f64, cut: f64) -> f64 {
    smoothstep((k.abs() - gap_lo) / (gap_hi - gap_lo)) * window(k, flat, cut)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSpec {
    pub gap_lo: f64,
    pub gap_hi: f64,
    pub flat: f64,
    pub cut: f64,
}

impl BandSpec {
    pub fn eval(&self, k: f64) -> f64 {
        band(k, self.gap_lo, self.gap_hi, self.flat, self.cut)
    }

    /// The certificate that the separable band carries: annulus radii and
    /// axis gap.
    pub fn annulus(&self) -> (f64, f64, f64) {
        (self.gap_lo * std::f64::consts::SQRT_2, self.cut * std::f64::consts::SQRT_2, self.gap_lo)
    }
}

/// Separable flat-top spectrum, real and even in space.
pub fn flat_top(grid: Arc<Grid>, a: f64, b: f64) -> SpectralField {
    SpectralField::from_fn(grid, |kx, ky| Complex64::new(window(kx, a, b) * window(ky, a, b), 0.0))
}

/// Separable band-pass spectrum vanishing near both axes.
pub fn band_pass(grid: Arc<Grid>, spec: BandSpec) -> SpectralField {
    SpectralField::from_fn(grid, |kx, ky| Complex64::new(spec.eval(kx) * spec.eval(ky), 0.0))
}

/// Translate a field by `shift` in space.
pub fn translate(f: &SpectralField, shift: (f64, f64)) -> SpectralField {
    f.map(|kx, ky, c| c * Complex64::from_polar(1.0, -(kx * shift.0 + ky * shift.1)))
}

/// Isotropic Gaussian `amp·exp(-|x - c|² / (2σ²))` sampled in space.
pub fn gaussian(grid: Arc<Grid>, amp: f64, sigma: f64, center: (f64, f64)) -> RealField {
    RealField::from_fn(grid, |x, y| {
        let r2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        amp * (-r2 / (2.0 * sigma * sigma)).exp()
    })
}

/// Spectrum of a spatial Gaussian, computed by transform.
/// Uniform samples in `[-1, 1]` from the ChaCha stream `(seed, stream)`.
pub fn random_field(grid: Arc<Grid>, seed: u64, stream: u64) -> RealField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let samples = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    RealField::new(grid, samples).expect("finite samples")
}

pub fn gaussian_spectrum(grid: Arc<Grid>, amp: f64, sigma: f64, center: (f64, f64)) -> SpectralField {
    forward(&gaussian(grid, amp, sigma, center))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_limits_and_symmetry() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
        for u in [0.1, 0.3, 0.77] {
            assert!((smoothstep(u) + smoothstep(1.0 - u) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn band_vanishes_on_the_gap() {
        let s = BandSpec { gap_lo: 0.1, gap_hi: 0.3, flat: 0.6, cut: 0.9 };
        assert_eq!(s.eval(0.05), 0.0);
        assert_eq!(s.eval(-0.1), 0.0);
        assert_eq!(s.eval(0.95), 0.0);
        assert_eq!(s.eval(0.45), 1.0);
    }
}
