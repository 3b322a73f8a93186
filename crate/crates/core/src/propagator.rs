//! The free group `V(t) = e^{-t(∂₁³+∂₂³)}`, its Airy kernel, and decay fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airy::ai_fourier;
use crate::error::{Result, ZkError};
use crate::fit::{log_space, loglog_fit};
use crate::grid::{apply_multiplier, inverse_with, upsample, FourierMultiplier, RealField, SpectralField};
use crate::par::{self, Execution};

/// `ω(k) = k₁³ + k₂³`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DispersionSymbol;

impl DispersionSymbol {
    #[inline]
    pub fn omega(&self, k1: f64, k2: f64) -> f64 {
        k1 * k1 * k1 + k2 * k2 * k2
    }

    /// Group velocity `∇ω = (3k₁², 3k₂²)`.
    #[inline]
    pub fn group_velocity(&self, k1: f64, k2: f64) -> (f64, f64) {
        (3.0 * k1 * k1, 3.0 * k2 * k2)
    }
}

#[inline]
pub fn omega(k1: f64, k2: f64) -> f64 {
    DispersionSymbol.omega(k1, k2)
}

/// `V(t)F`: coefficients times `e^{itω(k)}`, which solves
/// `∂_t w + (∂₁³+∂₂³) w = 0`.
pub fn propagate(f: &SpectralField, t: f64) -> SpectralField {
    if t == 0.0 {
        return f.clone();
    }
    f.map(|k1, k2, c| c * Complex64::from_polar(1.0, t * omega(k1, k2)))
}

/// `A(t, y) = t^{-1/3} Ai(t^{-1/3} y)` with the Fourier-normalized Airy
/// function, so that `V(t)` is convolution with [`kernel_2d`].
pub fn airy_kernel(t: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(ZkError::InvalidTime(format!("kernel needs t > 0, got {t}")));
    }
    let s = t.powf(-1.0 / 3.0);
    Ok(s * ai_fourier(s * y))
}

/// `K(t, x₁, x₂) = A(t, x₁)·A(t, x₂) / 2π`.
pub fn kernel_2d(t: f64, x1: f64, x2: f64) -> Result<f64> {
    Ok(airy_kernel(t, x1)? * airy_kernel(t, x2)? / (2.0 * std::f64::consts::PI))
}

/// Coefficients whose magnitude exceeds this fraction of the maximum count
/// as occupied when bounding the group speed.
pub const OCCUPIED_REL: f64 = 1e-10;

/// Latest time for which every occupied mode travels less than
/// `fraction·L/2` along each axis. The group velocity of `ω` is
/// `(3k₁², 3k₂²)`, so the bound is applied per axis.
pub fn wrap_safe_time(f: &SpectralField, fraction: f64) -> f64 {
    let g = f.grid();
    let thresh = OCCUPIED_REL * f.max_abs();
    let (mut kx, mut ky) = (0.0f64, 0.0f64);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if f.at(i, j).norm() > thresh {
                kx = kx.max(g.kx()[i].abs());
                ky = ky.max(g.ky()[j].abs());
            }
        }
    }
    let tx = if kx > 0.0 { fraction * 0.5 * g.lx() / (3.0 * kx * kx) } else { f64::INFINITY };
    let ty = if ky > 0.0 { fraction * 0.5 * g.ly() / (3.0 * ky * ky) } else { f64::INFINITY };
    tx.min(ty)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Maximum over (optionally refined) grid points.
    Linf,
    L2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayOptions {
    pub norm: NormKind,
    /// Zero-padding factor applied before taking the maximum.
    pub oversample: usize,
    /// Fraction of the half box that the fastest mode may cross.
    pub wrap_fraction: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self { norm: NormKind::Linf, oversample: 1, wrap_fraction: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub slope_ci: f64,
    pub intercept: f64,
}

impl DecayFit {
    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ZkError::InvalidArgument("sample times must increase".into()));
        }
        let fit = loglog_fit(&times, &values)?;
        Ok(Self { times, values, slope: fit.slope, slope_ci: fit.slope_ci, intercept: fit.intercept })
    }

    /// CSV rows `t,value` with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,value\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            s.push_str(&format!("{t:.17e},{v:.17e}\n"));
        }
        s
    }
}

/// Sample `‖weight·V(t)f‖` over the grid at `samples` log-spaced times.
pub fn decay_fit(f: &RealField, weight: Option<&FourierMultiplier>, t_range: (f64, f64), samples: usize) -> Result<DecayFit> {
    let spec = crate::grid::forward(f);
    decay_fit_spectral(&spec, weight, t_range, samples, DecayOptions::default(), Execution::default())
}

pub fn decay_fit_spectral(
    f: &SpectralField,
    weight: Option<&FourierMultiplier>,
    t_range: (f64, f64),
    samples: usize,
    opts: DecayOptions,
    exec: Execution,
) -> Result<DecayFit> {
    let (t0, t1) = t_range;
    if !(t0 > 0.0 && t1 > t0) {
        return Err(ZkError::InvalidTime(format!("bad range [{t0}, {t1}]")));
    }
    let t_safe = wrap_safe_time(f, opts.wrap_fraction);
    if t1 > t_safe {
        return Err(ZkError::WrapAround { t: t1, t_safe });
    }
    let base = match weight {
        Some(w) => apply_multiplier(w, f)?,
        None => f.clone(),
    };
    let times = log_space(t0, t1, samples);
    let values = par::try_map_range(times.len(), exec, |n| -> Result<f64> {
        let evolved = propagate(&base, times[n]);
        Ok(match opts.norm {
            NormKind::L2 => evolved.l2_norm(),
            NormKind::Linf => {
                let fine = if opts.oversample > 1 { upsample(&evolved, opts.oversample)? } else { evolved };
                inverse_with(&fine, Execution::Sequential).max_abs()
            }
        })
    })?;
    DecayFit::from_samples(times, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dealias, forward, make_grid};
    use std::f64::consts::PI;

    #[test]
    fn phase_sign_solves_linear_equation() {
        // Centered difference in t against the spatial operator ∂₁³+∂₂³.
        let g = make_grid(32, 32, 20.0, 20.0).unwrap();
        let f = dealias(&forward(&crate::data::gaussian(g, 1.0, 2.0, (0.0, 0.0))));
        let (t, h) = (0.7, 1e-6);
        let dt = propagate(&f, t + h).sub(&propagate(&f, t - h)).unwrap().scale(0.5 / h);
        let cubic = FourierMultiplier::derivative(3, 0)
            .apply(&propagate(&f, t))
            .unwrap()
            .add(&FourierMultiplier::derivative(0, 3).apply(&propagate(&f, t)).unwrap());
        let res = dt.add(&cubic.unwrap()).unwrap();
        assert!(res.l2_norm() < 1e-6 * dt.l2_norm(), "{}", res.l2_norm() / dt.l2_norm());
    }

    #[test]
    fn scaling_law_of_kernel() {
        let a1 = airy_kernel(1.0, 0.0).unwrap();
        let a8 = airy_kernel(8.0, 0.0).unwrap();
        assert!((a8 - 0.5 * a1).abs() < 1e-15);
        assert!(airy_kernel(0.0, 1.0).is_err());
        assert!(kernel_2d(-1.0, 0.0, 0.0).is_err());
        let k = kernel_2d(1.0, 0.0, 0.0).unwrap();
        assert!((k - a1 * a1 / (2.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn l2_decay_is_flat() {
        let g = make_grid(32, 32, 64.0, 64.0).unwrap();
        let f = dealias(&forward(&crate::data::gaussian(g, 1.0, 3.0, (0.0, 0.0))));
        let opts = DecayOptions { norm: NormKind::L2, ..Default::default() };
        let fit = decay_fit_spectral(&f, None, (1.0, 4.0), 6, opts, Execution::Sequential).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn wrap_violation_is_reported() {
        let g = make_grid(32, 32, 20.0, 20.0).unwrap();
        let f = forward(&crate::data::gaussian(g, 1.0, 1.0, (0.0, 0.0)));
        let err = decay_fit_spectral(&f, None, (1.0, 1e6), 5, DecayOptions::default(), Execution::Sequential);
        assert!(matches!(err, Err(ZkError::WrapAround { .. })));
    }
}
