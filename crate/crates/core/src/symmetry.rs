//! Change of variables between the physical equation
//!
//! ```text
//! ∂_t u + ∂ₓ³u + ∂ₓ∂_y²u = ∂ₓ(u²)
//! ```
//!
//! and the symmetric one, `x′ = a(x + √3 y)`, `y′ = a(x − √3 y)`,
//! `v = a·u` with `a = 2^{-2/3}`.
//!
//! A plane wave `e^{ik·x}` becomes `e^{ik′·x′}` with `k′ = M^{-T}k`, so
//! fields are moved by evaluating their trigonometric polynomial at the
//! mapped sample points. Points whose preimage leaves the source box are
//! set to zero: fields are treated as localized, not periodic.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::grid::{forward, inverse, product, FourierMultiplier, Grid, RealField, SpectralField};
use crate::par::{self, Execution};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// `2^{-2/3}`, the common scale of coordinates and amplitude.
pub fn scale() -> f64 {
    2f64.powf(-2.0 / 3.0)
}

/// Coefficients below this fraction of the maximum are ignored by the
/// band check.
pub const RANGE_REL: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Physical,
    Symmetric,
}

/// `(x, y) ↦ (x′, y′)`.
pub fn to_symmetric_coords(x: [f64; 2]) -> [f64; 2] {
    let a = scale();
    [a * (x[0] + SQRT3 * x[1]), a * (x[0] - SQRT3 * x[1])]
}

pub fn to_physical_coords(xs: [f64; 2]) -> [f64; 2] {
    let a = scale();
    [(xs[0] + xs[1]) / (2.0 * a), (xs[0] - xs[1]) / (2.0 * SQRT3 * a)]
}

/// Dual map on wavenumbers, `k′ = M^{-T}k`.
pub fn dual_map(k: [f64; 2]) -> [f64; 2] {
    let c = 1.0 / (2.0 * SQRT3 * scale());
    [c * (SQRT3 * k[0] + k[1]), c * (SQRT3 * k[0] - k[1])]
}

pub fn dual_inverse(ks: [f64; 2]) -> [f64; 2] {
    let a = scale();
    [a * (ks[0] + ks[1]), a * SQRT3 * (ks[0] - ks[1])]
}

/// Phase speed of the physical linear part: `e^{itΩ}` with `Ω = k₁³ + k₁k₂²`.
pub fn physical_symbol(k: [f64; 2]) -> f64 {
    k[0] * k[0] * k[0] + k[0] * k[1] * k[1]
}

/// `|det M| = 2√3·a²`.
pub fn jacobian() -> f64 {
    2.0 * SQRT3 * scale() * scale()
}

fn check_band(f: &SpectralField, target: &Grid, map: fn([f64; 2]) -> [f64; 2]) -> Result<()> {
    let g = f.grid();
    let thresh = RANGE_REL * f.max_abs();
    let (kx_max, ky_max) = target.max_kept_k();
    let slack = 1e-9;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if f.at(i, j).norm() <= thresh {
                continue;
            }
            let k = map([g.kx()[i], g.ky()[j]]);
            if k[0].abs() > kx_max + slack || k[1].abs() > ky_max + slack {
                return Err(ZkError::SpectralRange { k });
            }
        }
    }
    Ok(())
}

/// Sample `amp·f(P(x))` on `target`, where `f` is the trigonometric
/// polynomial of `src` restricted to its own box.
fn resample(src: &SpectralField, target: Arc<Grid>, point: fn([f64; 2]) -> [f64; 2], amp: f64) -> RealField {
    let g = src.grid().clone();
    let rows: Vec<usize> = (0..g.nx()).filter(|&i| (0..g.ny()).any(|j| src.at(i, j) != Complex64::new(0.0, 0.0))).collect();
    let cols: Vec<usize> = (0..g.ny()).filter(|&j| (0..g.nx()).any(|i| src.at(i, j) != Complex64::new(0.0, 0.0))).collect();
    let (hx, hy) = (0.5 * g.lx(), 0.5 * g.ly());
    // A Nyquist coefficient represents a cosine.
    let wave = |k: f64, x: f64, nyq: bool| if nyq { Complex64::new((k * x).cos(), 0.0) } else { Complex64::from_polar(1.0, k * x) };
    let ny_t = target.ny();
    let out = par::map_range(target.nx(), Execution::default(), |it| {
        let mut row = vec![0.0; ny_t];
        let mut ex = vec![Complex64::new(0.0, 0.0); rows.len()];
        let mut ey = vec![Complex64::new(0.0, 0.0); cols.len()];
        for (jt, out) in row.iter_mut().enumerate() {
            let p = point([target.x(it), target.y(jt)]);
            if p[0] < -hx || p[0] >= hx || p[1] < -hy || p[1] >= hy {
                continue;
            }
            for (e, &i) in ex.iter_mut().zip(&rows) {
                *e = wave(g.kx()[i], p[0], i == g.nx() / 2);
            }
            for (e, &j) in ey.iter_mut().zip(&cols) {
                *e = wave(g.ky()[j], p[1], j == g.ny() / 2);
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (&i, &wx) in rows.iter().zip(&ex) {
                let mut inner = Complex64::new(0.0, 0.0);
                for (&j, &wy) in cols.iter().zip(&ey) {
                    inner += src.at(i, j) * wy;
                }
                acc += wx * inner;
            }
            *out = amp * acc.re;
        }
        row
    });
    RealField::new(target, out.concat()).expect("finite resampled field")
}

/// Physical `u` to symmetric `v` sampled on the same grid.
pub fn to_symmetric(u: &RealField) -> Result<RealField> {
    to_symmetric_on(u, u.grid().clone())
}

pub fn to_symmetric_on(u: &RealField, target: Arc<Grid>) -> Result<RealField> {
    let spec = forward(u);
    check_band(&spec, &target, dual_map)?;
    Ok(resample(&spec, target, to_physical_coords, scale()))
}

pub fn from_symmetric(v: &RealField) -> Result<RealField> {
    from_symmetric_on(v, v.grid().clone())
}

pub fn from_symmetric_on(v: &RealField, target: Arc<Grid>) -> Result<RealField> {
    let spec = forward(v);
    check_band(&spec, &target, dual_inverse)?;
    Ok(resample(&spec, target, to_symmetric_coords, 1.0 / scale()))
}

/// `∂_t v + (∂₁³+∂₂³)v − (∂₁+∂₂)(v²)` at interior snapshots, with centered
/// time differences on a uniform stride.
pub fn symmetric_residuals(v_traj: &[(f64, RealField)]) -> Result<Vec<f64>> {
    if v_traj.len() < 3 {
        return Err(ZkError::InsufficientData(format!("need at least 3 snapshots, got {}", v_traj.len())));
    }
    let cubic = FourierMultiplier::derivative(3, 0);
    let cubic2 = FourierMultiplier::derivative(0, 3);
    let d1 = FourierMultiplier::derivative(1, 0);
    let d2 = FourierMultiplier::derivative(0, 1);
    let mut out = Vec::with_capacity(v_traj.len() - 2);
    for w in v_traj.windows(3) {
        let (t0, a) = (&w[0].0, &w[0].1);
        let (t2, c) = (&w[2].0, &w[2].1);
        let b = &w[1].1;
        if !(t2 > t0) {
            return Err(ZkError::InvalidTime("snapshot times must increase".into()));
        }
        let dt = forward(&c.zip_with(a, |x, y| (x - y) / (t2 - t0))?);
        let vb = forward(b);
        let lin = cubic.apply(&vb)?.add(&cubic2.apply(&vb)?)?;
        let sq = forward(&product(b, b)?);
        let nl = d1.apply(&sq)?.add(&d2.apply(&sq)?)?;
        let r = dt.add(&lin)?.sub(&nl)?;
        out.push(r.l2_norm());
    }
    Ok(out)
}

/// Map a physical trajectory to the symmetric frame on `target` and return
/// the largest residual of the symmetric equation.
pub fn transform_residual(u_traj: &[(f64, RealField)], target: Arc<Grid>) -> Result<f64> {
    if u_traj.len() < 3 {
        return Err(ZkError::InsufficientData(format!("need at least 3 snapshots, got {}", u_traj.len())));
    }
    let v: Vec<(f64, RealField)> = u_traj.iter().map(|(t, u)| Ok((*t, to_symmetric_on(u, target.clone())?))).collect::<Result<_>>()?;
    Ok(symmetric_residuals(&v)?.into_iter().fold(0.0, f64::max))
}

/// `v` back in physical samples, for callers that hold spectra.
pub fn from_symmetric_spectral(v: &SpectralField, target: Arc<Grid>) -> Result<RealField> {
    from_symmetric_on(&inverse(v), target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian;
    use crate::grid::make_grid;

    #[test]
    fn coordinate_maps_invert() {
        for p in [[0.3, -1.2], [5.0, 2.0], [-7.5, 0.1]] {
            let q = to_physical_coords(to_symmetric_coords(p));
            assert!((q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14);
            let k = dual_inverse(dual_map(p));
            assert!((k[0] - p[0]).abs() < 1e-14 && (k[1] - p[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn plane_wave_phase_is_preserved() {
        let (k, x) = ([0.7, -1.3], [2.1, 0.4]);
        let (ks, xs) = (dual_map(k), to_symmetric_coords(x));
        let lhs = k[0] * x[0] + k[1] * x[1];
        let rhs = ks[0] * xs[0] + ks[1] * xs[1];
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn symbol_maps_to_symmetric_dispersion() {
        for k in [[1.0, 0.0], [0.3, 2.2], [-1.7, 0.9]] {
            let ks = dual_map(k);
            let w = ks[0].powi(3) + ks[1].powi(3);
            assert!((w - physical_symbol(k)).abs() < 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = make_grid(16, 16, 20.0, 20.0).unwrap();
        let z = RealField::zeros(g);
        assert_eq!(to_symmetric(&z).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn out_of_band_is_rejected() {
        let g = make_grid(16, 16, 20.0, 20.0).unwrap();
        let u = gaussian(g, 1.0, 0.3, (0.0, 0.0));
        assert!(matches!(to_symmetric(&u), Err(ZkError::SpectralRange { .. })));
    }
}
