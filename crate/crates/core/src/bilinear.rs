//! Bilinear Fourier sums, the correction field `v₂` and the
//! time-resonant / space-resonant split.
//!
//! All sums are direct: for every retained output mode `ξ` the engine walks
//! the nonzero modes `η` of the second factor and looks up `ξ − η` in the
//! first. With the coefficient convention of [`crate::grid`] the plain
//! convolution `Σ_η f̂(ξ−η)ĝ(η)` is the coefficient of the product, so no
//! extra `Δη` weight appears.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::grid::{forward_complex, inverse_complex, FourierMultiplier, Grid, SingularSet, SpectralField};
use crate::norms::FinalData;
use crate::par::{self, Execution};
use crate::propagator::{omega, DecayFit};
use crate::quad::log_phase_integral;
use crate::resonance::{eval_p, eval_phi, BilinearSymbol, FreqPair};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative mass near the axes above which data count as inadmissible.
pub const AXIS_MASS_MAX: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct BilinearOp {
    pub symbol: BilinearSymbol,
    pub grid: Arc<Grid>,
}

/// Nonzero coefficients as `(m1, m2, k1, k2, value)`.
fn sparse(f: &SpectralField) -> Vec<(i64, i64, f64, f64, Complex64)> {
    let g = f.grid();
    let mut out = Vec::new();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let c = f.at(i, j);
            if c != ZERO {
                out.push((g.mode_x(i), g.mode_y(j), g.kx()[i], g.ky()[j], c));
            }
        }
    }
    out
}

/// `out(ξ) = Σ_η K(ξ, η) f̂(ξ−η) ĝ(η)` over retained `ξ`.
pub fn pair_sum<K>(f: &SpectralField, g: &SpectralField, kernel: K, exec: Execution) -> Result<SpectralField>
where
    K: Fn(&FreqPair) -> Result<Complex64> + Sync + Send,
{
    f.grid().check_same(g.grid())?;
    let grid = f.grid().clone();
    let g_modes = sparse(g);
    let (nx, ny) = (grid.nx(), grid.ny());
    let rows = par::try_map_range(nx, exec, |i| -> Result<Vec<Complex64>> {
        let mut row = vec![ZERO; ny];
        if !grid.keep_x(i) {
            return Ok(row);
        }
        let (p1, xi1) = (grid.mode_x(i), grid.kx()[i]);
        for (j, out) in row.iter_mut().enumerate() {
            if !grid.keep_y(j) {
                continue;
            }
            let (p2, xi2) = (grid.mode_y(j), grid.ky()[j]);
            let mut acc = ZERO;
            for &(q1, q2, e1, e2, gv) in &g_modes {
                let fv = f.mode(p1 - q1, p2 - q2);
                if fv == ZERO {
                    continue;
                }
                acc += kernel(&FreqPair::new([xi1, xi2], [e1, e2]))? * fv * gv;
            }
            *out = acc;
        }
        Ok(row)
    })?;
    SpectralField::new(grid, rows.concat())
}

/// `T_m[f, g]`.
pub fn apply_tm(op: &BilinearOp, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    apply_tm_with(op, f, g, Execution::default())
}

pub fn apply_tm_with(op: &BilinearOp, f: &SpectralField, g: &SpectralField, exec: Execution) -> Result<SpectralField> {
    f.grid().check_same(&op.grid)?;
    let s = op.symbol;
    pair_sum(f, g, |pair| Ok(Complex64::new(s.eval(pair)?, 0.0)), exec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct V2Config {
    pub t: f64,
    pub t_max: f64,
    /// `|φ(T−t)|` below which the Taylor branch of `Φ` is used.
    pub phase_switch: f64,
    pub dealias: bool,
}

impl V2Config {
    pub fn new(t: f64, t_max: f64) -> Self {
        Self { t, t_max, phase_switch: 1e-8, dealias: true }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t < self.t_max && self.t_max.is_finite()) {
            return Err(ZkError::InvalidTime(format!("need 0 < t < t_max, got t = {}, t_max = {}", self.t, self.t_max)));
        }
        if !(self.phase_switch > 0.0) {
            return Err(ZkError::InvalidArgument("phase switch must be positive".into()));
        }
        Ok(())
    }
}

/// `Φ(t, T, φ) = ∫_t^T e^{-iτφ} dτ`.
pub fn phase_integral(t: f64, big_t: f64, phi: f64, switch: f64) -> Complex64 {
    let d = big_t - t;
    let z = phi * d;
    let lead = Complex64::from_polar(1.0, -t * phi);
    if z.abs() > switch {
        (lead - Complex64::from_polar(1.0, -big_t * phi)) / (I * phi)
    } else {
        lead * d * Complex64::new(1.0 - z * z / 6.0, -z / 2.0 + z * z * z / 24.0)
    }
}

/// Relative `L²` mass of `f` on the coordinate axes.
pub fn axis_mass(f: &SpectralField) -> f64 {
    let g = f.grid();
    let (mut on, mut tot) = (0.0, 0.0);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let w = f.at(i, j).norm_sqr();
            tot += w;
            if SingularSet::Axes.contains(g.kx()[i], g.ky()[j]) {
                on += w;
            }
        }
    }
    if tot == 0.0 {
        0.0
    } else {
        (on / tot).sqrt()
    }
}

fn check_admissible(vinf: &SpectralField) -> Result<()> {
    let m = axis_mass(vinf);
    if m > AXIS_MASS_MAX {
        return Err(ZkError::Inadmissible(format!("relative mass {m:.3e} on the frequency axes")));
    }
    Ok(())
}

/// `v̂₂(t,ξ) = −i(ξ₁+ξ₂) e^{itω(ξ)} Σ_η Φ(t, t_max, φ(ξ,η)) v̂∞(ξ−η) v̂∞(η)`, which
/// solves `ℒv₂ = (∂₁+∂₂)(v₁²)` with `v₂(t_max) = 0`.
pub fn build_v2(vinf: &SpectralField, cfg: &V2Config) -> Result<SpectralField> {
    build_v2_with(vinf, cfg, Execution::default())
}

pub fn build_v2_with(vinf: &SpectralField, cfg: &V2Config, exec: Execution) -> Result<SpectralField> {
    cfg.validate()?;
    check_admissible(vinf)?;
    let (t, big_t, sw) = (cfg.t, cfg.t_max, cfg.phase_switch);
    let s = pair_sum(vinf, vinf, |pair| Ok(phase_integral(t, big_t, eval_phi(pair), sw)), exec)?;
    Ok(s.map(|k1, k2, c| -I * (k1 + k2) * Complex64::from_polar(1.0, t * omega(k1, k2)) * c))
}

/// `I(ξ) = i e^{-itω(ξ)} v̂₂(t, ξ) = (ξ₁+ξ₂) Σ_η Φ v̂∞ v̂∞`.
pub fn i_from_v2(v2: &SpectralField, t: f64) -> SpectralField {
    v2.map(|k1, k2, c| I * Complex64::from_polar(1.0, -t * omega(k1, k2)) * c)
}

/// The split of `I` with both endpoint terms of the time integration by
/// parts carried explicitly.
#[derive(Clone, Debug)]
pub struct SplitI {
    /// Time-resonant part, both endpoints included.
    pub i_tr: SpectralField,
    /// The `t_max` endpoint contribution contained in `i_tr`.
    pub i_tr_horizon: SpectralField,
    /// Space-resonant part after integration by parts in `η`.
    pub i_sr: SpectralField,
}

impl SplitI {
    pub fn recomposed(&self) -> Result<SpectralField> {
        self.i_tr.add(&self.i_sr)
    }
}

fn eta_multiplier(s: BilinearSymbol) -> FourierMultiplier {
    FourierMultiplier::new(format!("g[{}]", s.name()), SingularSet::Axes, move |k1, k2| {
        Complex64::new(s.eta_factor([k1, k2]).unwrap_or(0.0), 0.0)
    })
}

/// Multiply by `x₁` or `x₂` in space; the coefficients then represent
/// `i ∂_ζ` of the continuous transform.
fn x_weighted(f: &SpectralField, axis: usize) -> Result<SpectralField> {
    let g = f.grid();
    let mut z = inverse_complex(f, Execution::Sequential);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            z[i * g.ny() + j] *= if axis == 0 { g.x(i) } else { g.y(j) };
        }
    }
    forward_complex(g, z, Execution::Sequential)
}

struct Piece {
    symbol: BilinearSymbol,
    axis: usize,
    g: SpectralField,
    xg: SpectralField,
}

/// The split `I = I_tr + I_sr` at time `t` with horizon `t_max`.
///
/// `I_tr = Σ_η (A/p)·φΦ·v̂v̂ = −i Σ (A/p)(e^{-itφ} − e^{-iTφ}) v̂v̂` is evaluated
/// per piece `m_tr_k · g_k(η)`. `I_sr = Σ_j Σ_η (B_j/p) ∂_{η_j}φ Φ v̂v̂` is
/// rewritten through `∂_{η_j}φ e^{-iτφ} = (i/τ)∂_{η_j}e^{-iτφ}`, summation by
/// parts in `η` and the exact time integral `Ψ = ∫_t^T e^{-iτφ}/τ dτ`:
///
/// ```text
/// I_sr,jk = −i Σ_η Ψ [ ∂_{η_j}m · f̂ ĝ + i m · (x_j f)^(ξ−η) ĝ(η) − i m · f̂(ξ−η) (x_j g)^(η) ]
/// ```
///
/// with `ĝ = g_jk(η) v̂∞(η)`. The pieces are accumulated in one pass so
/// that `Ψ` is evaluated once per mode pair.
pub fn split_i(vinf: &SpectralField, cfg: &V2Config) -> Result<SplitI> {
    split_i_with(vinf, cfg, Execution::default())
}

pub fn split_i_with(vinf: &SpectralField, cfg: &V2Config, exec: Execution) -> Result<SplitI> {
    cfg.validate()?;
    check_admissible(vinf)?;
    let grid = vinf.grid().clone();
    let (t, big_t) = (cfg.t, cfg.t_max);

    let tr: Vec<(BilinearSymbol, SpectralField)> = (1..=3)
        .map(|k| {
            let s = BilinearSymbol::Tr(k);
            Ok((s, eta_multiplier(s).apply(vinf)?))
        })
        .collect::<Result<_>>()?;
    let mut pieces = Vec::new();
    for j in 1..=2u8 {
        for k in 1..=3u8 {
            let s = BilinearSymbol::Sr(j, k);
            let g = eta_multiplier(s).apply(vinf)?;
            let axis = (j - 1) as usize;
            let xg = x_weighted(&g, axis)?;
            pieces.push(Piece { symbol: s, axis, g, xg });
        }
    }
    let xf = [x_weighted(vinf, 0)?, x_weighted(vinf, 1)?];

    // Every η that can contribute: union of the supports of all second factors.
    let mut eta_modes: Vec<(usize, usize)> = Vec::new();
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let any = tr.iter().any(|(_, g)| g.at(i, j) != ZERO) || pieces.iter().any(|p| p.g.at(i, j) != ZERO || p.xg.at(i, j) != ZERO);
            if any {
                eta_modes.push((i, j));
            }
        }
    }

    let (nx, ny) = (grid.nx(), grid.ny());
    let rows = par::try_map_range(nx, exec, |i| -> Result<Vec<[Complex64; 3]>> {
        let mut row = vec![[ZERO; 3]; ny];
        if !grid.keep_x(i) {
            return Ok(row);
        }
        let (p1, xi1) = (grid.mode_x(i), grid.kx()[i]);
        for (j, out) in row.iter_mut().enumerate() {
            if !grid.keep_y(j) {
                continue;
            }
            let (p2, xi2) = (grid.mode_y(j), grid.ky()[j]);
            let (mut acc_tr, mut acc_h, mut acc_sr) = (ZERO, ZERO, ZERO);
            for &(a, b) in &eta_modes {
                let (q1, q2) = (grid.mode_x(a), grid.mode_y(b));
                let (d1, d2) = (p1 - q1, p2 - q2);
                let fv = vinf.mode(d1, d2);
                let xfv = [xf[0].mode(d1, d2), xf[1].mode(d1, d2)];
                if fv == ZERO && xfv[0] == ZERO && xfv[1] == ZERO {
                    continue;
                }
                let pair = FreqPair::new([xi1, xi2], [grid.kx()[a], grid.ky()[b]]);
                // p vanishes only at ξ = η = 0, which only the x-weighted factors can reach.
                if eval_p(&pair) <= 0.0 {
                    continue;
                }
                let phi = eval_phi(&pair);
                let e_t = Complex64::from_polar(1.0, -t * phi);
                let e_big = Complex64::from_polar(1.0, -big_t * phi);
                if fv != ZERO {
                    for (s, g) in &tr {
                        let gv = g.at(a, b);
                        if gv != ZERO {
                            let w = s.eval(&pair)? * fv * gv;
                            acc_tr += -I * (e_t - e_big) * w;
                            acc_h += I * e_big * w;
                        }
                    }
                }
                let psi = log_phase_integral(t, big_t, phi);
                let mut inner = ZERO;
                for pc in &pieces {
                    let (gv, xgv) = (pc.g.at(a, b), pc.xg.at(a, b));
                    if gv == ZERO && xgv == ZERO {
                        continue;
                    }
                    let m = pc.symbol.eval(&pair)?;
                    let dm = pc.symbol.grad(&pair)?.deta[pc.axis];
                    inner += dm * fv * gv + I * m * xfv[pc.axis] * gv - I * m * fv * xgv;
                }
                acc_sr += -I * psi * inner;
            }
            *out = [acc_tr, acc_h, acc_sr];
        }
        Ok(row)
    })?;
    let flat: Vec<[Complex64; 3]> = rows.concat();
    let pick = |n: usize| SpectralField::new(grid.clone(), flat.iter().map(|v| v[n]).collect());
    Ok(SplitI { i_tr: pick(0)?, i_tr_horizon: pick(1)?, i_sr: pick(2)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XfReport {
    pub t_max: f64,
    /// `‖v₂(t)‖_{H³}` against `t`.
    pub h3: DecayFit,
    /// `‖v₂(t)‖_{L²}` against `t`.
    pub l2: DecayFit,
    pub z_norm: f64,
    /// `t·‖v₂(t)‖_{H³} / ‖v∞‖_Z²`.
    pub ratios: Vec<f64>,
    pub ratio_spread: f64,
}

/// Evaluate `v₂` on `times`, fit its decay, and report the boundedness ratio.
pub fn lemma_xf_check(vinf: &FinalData, times: &[f64], t_max: f64) -> Result<XfReport> {
    lemma_xf_check_with(vinf, times, t_max, Execution::default())
}

pub fn lemma_xf_check_with(vinf: &FinalData, times: &[f64], t_max: f64, exec: Execution) -> Result<XfReport> {
    let mut h3 = Vec::with_capacity(times.len());
    let mut l2 = Vec::with_capacity(times.len());
    for &t in times {
        let v2 = build_v2_with(vinf.field(), &V2Config::new(t, t_max), exec)?;
        h3.push(crate::norms::sobolev_norm(&v2, 3.0, crate::norms::Exponent::Two));
        l2.push(v2.l2_norm());
    }
    let z = vinf.z_norm();
    let ratios: Vec<f64> = times.iter().zip(&h3).map(|(t, v)| t * v / (z * z)).collect();
    let hi = ratios.iter().cloned().fold(0.0f64, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(XfReport {
        t_max,
        h3: DecayFit::from_samples(times.to_vec(), h3)?,
        l2: DecayFit::from_samples(times.to_vec(), l2)?,
        z_norm: z,
        ratios,
        ratio_spread: hi / lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dealias, forward, make_grid, product, RealField};
    use std::f64::consts::PI;

    #[test]
    fn phase_integral_branches_meet() {
        let (t, tt) = (3.0, 5.0);
        for &phi in &[1e-9, 4.9e-9, 5.1e-9, 1e-6, 0.3] {
            let a = phase_integral(t, tt, phi, 1e-8);
            let b = if phi * (tt - t) > 1e-8 { phase_integral(t, tt, phi, 1e-12) } else { phase_integral(t, tt, phi, 1.0) };
            assert!((a - b).norm() < 1e-14 * (tt - t));
            assert!(a.norm() <= (tt - t) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn unit_symbol_is_product() {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let c = RealField::from_fn(g.clone(), |x, _| x.cos());
        let f = dealias(&forward(&c));
        let op = BilinearOp { symbol: BilinearSymbol::One, grid: g.clone() };
        let t = apply_tm(&op, &f, &f).unwrap();
        let p = forward(&product(&c, &c).unwrap());
        assert!(t.sub(&p).unwrap().max_abs() < 1e-15);
        assert!((t.mode(0, 0).re - 0.5).abs() < 1e-15);
        assert!((t.mode(2, 0).re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_data_give_zero() {
        let g = make_grid(16, 16, 20.0, 20.0).unwrap();
        let z = SpectralField::zeros(g);
        let cfg = V2Config::new(1.0, 4.0);
        assert_eq!(build_v2(&z, &cfg).unwrap().max_abs(), 0.0);
        let s = split_i(&z, &cfg).unwrap();
        assert_eq!(s.i_tr.max_abs(), 0.0);
        assert_eq!(s.i_sr.max_abs(), 0.0);
        assert!(build_v2(&z, &V2Config::new(4.0, 4.0)).is_err());
    }
}
