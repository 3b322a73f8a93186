//! Resonance algebra for `ω(ξ) = ξ₁³ + ξ₂³`.
//!
//! With `u_j = ξ_j − 2η_j` the resonant function, its `η`-gradient and the
//! weight are
//!
//! ```text
//! φ   = 3ξ₁(ξ₁−η₁)η₁ + 3ξ₂(ξ₂−η₂)η₂
//! ∇_ηφ = (3ξ₁u₁, 3ξ₂u₂)
//! p   = ξ₁² − ξ₁ξ₂ + ξ₂² + u₁² + u₂²
//! ```
//!
//! and the null form `(ξ₁+ξ₂)` factors as `(ξ₁+ξ₂)p = Aφ + B₁∂_{η₁}φ + B₂∂_{η₂}φ`.
//! Each of `A/p`, `B₁/p`, `B₂/p` is split into pieces `m(ξ,η)·g(η)` where
//! `m` is a zero-homogeneous symbol with denominator `p` and `g` depends on
//! `η` only; the pieces are the registry entries `m_tr_k`, `m_sr_j_k`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::par::{self, Execution};

/// Relative size below which an `η` component counts as on the axis.
pub const ETA_MIN_REL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreqPair {
    pub xi: [f64; 2],
    pub eta: [f64; 2],
}

impl FreqPair {
    pub fn new(xi: [f64; 2], eta: [f64; 2]) -> Self {
        Self { xi, eta }
    }

    /// `(ζ, σ) = (ξ − η, η)` inverted.
    pub fn from_tilde(zeta: [f64; 2], sigma: [f64; 2]) -> Self {
        Self { xi: [zeta[0] + sigma[0], zeta[1] + sigma[1]], eta: sigma }
    }

    /// `1 + |ξ|³ + |η|³`, the natural size of the cubic identities.
    pub fn cubic_scale(&self) -> f64 {
        let n = |v: [f64; 2]| (v[0] * v[0] + v[1] * v[1]).sqrt();
        1.0 + n(self.xi).powi(3) + n(self.eta).powi(3)
    }

    fn on_axis(&self) -> bool {
        let scale = self.xi[0].abs().max(self.xi[1].abs()).max(self.eta[0].abs()).max(self.eta[1].abs());
        let tol = ETA_MIN_REL * scale;
        self.eta[0].abs() <= tol || self.eta[1].abs() <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEval {
    pub phi: f64,
    pub dphi: [f64; 2],
    pub p: f64,
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
    pub defined: bool,
}

pub fn eval_phi(pair: &FreqPair) -> f64 {
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    3.0 * x1 * (x1 - e1) * e1 + 3.0 * x2 * (x2 - e2) * e2
}

/// `ω(ξ) − ω(ξ−η) − ω(η)` written out.
pub fn eval_phi_cubic(pair: &FreqPair) -> f64 {
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    let w = |a: f64, b: f64| a * a * a + b * b * b;
    w(x1, x2) - w(x1 - e1, x2 - e2) - w(e1, e2)
}

pub fn eval_grad_phi(pair: &FreqPair) -> [f64; 2] {
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    [3.0 * x1 * (x1 - 2.0 * e1), 3.0 * x2 * (x2 - 2.0 * e2)]
}

pub fn eval_p(pair: &FreqPair) -> f64 {
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    let (u1, u2) = (x1 - 2.0 * e1, x2 - 2.0 * e2);
    x1 * x1 - x1 * x2 + x2 * x2 + u1 * u1 + u2 * u2
}

fn grad_p(pair: &FreqPair) -> ([f64; 2], [f64; 2]) {
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    let (u1, u2) = (x1 - 2.0 * e1, x2 - 2.0 * e2);
    ([2.0 * x1 - x2 + 2.0 * u1, 2.0 * x2 - x1 + 2.0 * u2], [-4.0 * u1, -4.0 * u2])
}

pub fn eval_decomposition(pair: &FreqPair) -> ResonanceEval {
    let phi = eval_phi(pair);
    let dphi = eval_grad_phi(pair);
    let p = eval_p(pair);
    let ([_, _], [e1, e2]) = (pair.xi, pair.eta);
    let (u1, u2) = (pair.xi[0] - 2.0 * e1, pair.xi[1] - 2.0 * e2);
    if pair.on_axis() {
        return ResonanceEval { phi, dphi, p, a: f64::NAN, b1: f64::NAN, b2: f64::NAN, defined: false };
    }
    let third = 1.0 / 3.0;
    let (e1s, e2s) = (e1 * e1, e2 * e2);
    let a = 4.0 * third + third * u1 * u1 / e2s + third * u2 * u2 / e1s;
    let b1 = third * u1 * (2.0 * e2s - e1s) / e2s - third * u1 * u1 * e1 / e2s - third * u2 * u2 / e1;
    let b2 = third * u2 * (2.0 * e1s - e2s) / e1s - third * u1 * u1 / e2 - third * u2 * u2 * e2 / e1s;
    ResonanceEval { phi, dphi, p, a, b1, b2, defined: true }
}

/// `|(ξ₁+ξ₂)p − (Aφ + B₁∂₁φ + B₂∂₂φ)| / (1+|ξ|³+|η|³)`; NaN off the domain.
pub fn key_identity_residual(pair: &FreqPair) -> f64 {
    let e = eval_decomposition(pair);
    if !e.defined {
        return f64::NAN;
    }
    let lhs = (pair.xi[0] + pair.xi[1]) * e.p;
    let rhs = e.a * e.phi + e.b1 * e.dphi[0] + e.b2 * e.dphi[1];
    (lhs - rhs).abs() / pair.cubic_scale()
}

/// Euler-type identity `φ − η·∇_ηφ = 3ξ₁η₁² + 3ξ₂η₂²`, scaled residual.
pub fn euler_residual(pair: &FreqPair) -> f64 {
    let phi = eval_phi(pair);
    let d = eval_grad_phi(pair);
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    let lhs = phi - (e1 * d[0] + e2 * d[1]);
    let rhs = 3.0 * x1 * e1 * e1 + 3.0 * x2 * e2 * e2;
    (lhs - rhs).abs() / pair.cubic_scale()
}

/// `ξ₁³+ξ₂³ = (4/3)φ + (1/3)u₁∂₁φ + (1/3)u₂∂₂φ`, scaled residual.
pub fn cubic_split_residual(pair: &FreqPair) -> f64 {
    let phi = eval_phi(pair);
    let d = eval_grad_phi(pair);
    let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
    let (u1, u2) = (x1 - 2.0 * e1, x2 - 2.0 * e2);
    let rhs = (4.0 * phi + u1 * d[0] + u2 * d[1]) / 3.0;
    (x1 * x1 * x1 + x2 * x2 * x2 - rhs).abs() / pair.cubic_scale()
}

/// Registry of bilinear symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BilinearSymbol {
    One,
    Phi,
    /// `m_tr_k`, pieces of `A/p`.
    Tr(u8),
    /// `m_sr_j_k`, pieces of `B_j/p`.
    Sr(u8, u8),
    /// `∂_{σ₁} m̃_sr_j_k`, i.e. `(∂_{ξ₁} + ∂_{η₁}) m_sr_j_k`.
    DSigma1Sr(u8, u8),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolGrad {
    pub dxi: [f64; 2],
    pub deta: [f64; 2],
}

/// A numerator `N` with its gradients.
struct Numerator {
    v: f64,
    dxi: [f64; 2],
    deta: [f64; 2],
}

impl BilinearSymbol {
    pub fn registry() -> Vec<BilinearSymbol> {
        let mut r = vec![BilinearSymbol::Phi, BilinearSymbol::One];
        r.extend((1..=3).map(BilinearSymbol::Tr));
        for j in 1..=2 {
            r.extend((1..=3).map(|k| BilinearSymbol::Sr(j, k)));
        }
        for j in 1..=2 {
            r.extend((1..=3).map(|k| BilinearSymbol::DSigma1Sr(j, k)));
        }
        r
    }

    pub fn name(&self) -> String {
        match self {
            BilinearSymbol::One => "one".into(),
            BilinearSymbol::Phi => "phi".into(),
            BilinearSymbol::Tr(k) => format!("m_tr_{k}"),
            BilinearSymbol::Sr(j, k) => format!("m_sr_{j}_{k}"),
            BilinearSymbol::DSigma1Sr(j, k) => format!("dsigma1_m_sr_{j}_{k}"),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::registry().into_iter().find(|s| s.name() == name).ok_or_else(|| ZkError::UnknownSymbol(name.to_string()))
    }

    /// Whether the symbol divides by `p`.
    pub fn has_denominator(&self) -> bool {
        !matches!(self, BilinearSymbol::One | BilinearSymbol::Phi)
    }

    fn numerator(&self, pair: &FreqPair) -> Numerator {
        let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
        let (u1, u2) = (x1 - 2.0 * e1, x2 - 2.0 * e2);
        let sq1 = Numerator { v: u1 * u1, dxi: [2.0 * u1, 0.0], deta: [-4.0 * u1, 0.0] };
        let sq2 = Numerator { v: u2 * u2, dxi: [0.0, 2.0 * u2], deta: [0.0, -4.0 * u2] };
        match *self {
            BilinearSymbol::Tr(1) => Numerator { v: e2 * e2, dxi: [0.0, 0.0], deta: [0.0, 2.0 * e2] },
            BilinearSymbol::Tr(2) | BilinearSymbol::Sr(1, 2) | BilinearSymbol::Sr(2, 2) => sq1,
            BilinearSymbol::Tr(3) | BilinearSymbol::Sr(1, 3) | BilinearSymbol::Sr(2, 3) => sq2,
            BilinearSymbol::Sr(1, 1) => {
                let w = SQRT_2 * e2 - e1;
                Numerator { v: u1 * w, dxi: [w, 0.0], deta: [-2.0 * w - u1, SQRT_2 * u1] }
            }
            BilinearSymbol::Sr(2, 1) => {
                let w = SQRT_2 * e1 - e2;
                Numerator { v: u2 * w, dxi: [0.0, w], deta: [SQRT_2 * u2, -2.0 * w - u2] }
            }
            _ => unreachable!("not a rational registry symbol: {:?}", self),
        }
    }

    /// The `η`-only factor `g` with `Σ_k m_tr_k g_k = A/p` and
    /// `Σ_k m_sr_j_k g_jk = B_j/p`. `None` for symbols outside the split.
    pub fn eta_factor(&self, eta: [f64; 2]) -> Option<f64> {
        let [e1, e2] = eta;
        let third = 1.0 / 3.0;
        Some(match *self {
            BilinearSymbol::Tr(1) => 4.0 * third / (e2 * e2),
            BilinearSymbol::Tr(2) => third / (e2 * e2),
            BilinearSymbol::Tr(3) => third / (e1 * e1),
            BilinearSymbol::Sr(1, 1) => third * (SQRT_2 * e2 + e1) / (e2 * e2),
            BilinearSymbol::Sr(1, 2) => -third * e1 / (e2 * e2),
            BilinearSymbol::Sr(1, 3) => -third / e1,
            BilinearSymbol::Sr(2, 1) => third * (SQRT_2 * e1 + e2) / (e1 * e1),
            BilinearSymbol::Sr(2, 2) => -third / e2,
            BilinearSymbol::Sr(2, 3) => -third * e2 / (e1 * e1),
            _ => return None,
        })
    }

    fn check_p(pair: &FreqPair) -> Result<f64> {
        let p = eval_p(pair);
        if p <= 0.0 {
            return Err(ZkError::DegenerateDenominator { xi: pair.xi, eta: pair.eta });
        }
        Ok(p)
    }

    pub fn eval(&self, pair: &FreqPair) -> Result<f64> {
        match *self {
            BilinearSymbol::One => Ok(1.0),
            BilinearSymbol::Phi => Ok(eval_phi(pair)),
            BilinearSymbol::DSigma1Sr(j, k) => {
                let g = BilinearSymbol::Sr(j, k).grad(pair)?;
                Ok(g.dxi[0] + g.deta[0])
            }
            _ => {
                let p = Self::check_p(pair)?;
                Ok(self.numerator(pair).v / p)
            }
        }
    }

    pub fn tilde_eval(&self, zeta: [f64; 2], sigma: [f64; 2]) -> Result<f64> {
        self.eval(&FreqPair::from_tilde(zeta, sigma))
    }

    /// Analytic gradient in `ξ` and `η` (rational symbols and `one`, `phi`).
    pub fn grad(&self, pair: &FreqPair) -> Result<SymbolGrad> {
        match *self {
            BilinearSymbol::One => Ok(SymbolGrad { dxi: [0.0; 2], deta: [0.0; 2] }),
            BilinearSymbol::Phi => {
                let ([x1, x2], [e1, e2]) = (pair.xi, pair.eta);
                Ok(SymbolGrad { dxi: [3.0 * (2.0 * x1 * e1 - e1 * e1), 3.0 * (2.0 * x2 * e2 - e2 * e2)], deta: eval_grad_phi(pair) })
            }
            BilinearSymbol::DSigma1Sr(..) => Err(ZkError::InvalidArgument(format!("no analytic gradient for {}", self.name()))),
            _ => {
                let p = Self::check_p(pair)?;
                let n = self.numerator(pair);
                let (gpx, gpe) = grad_p(pair);
                let q = |dn: f64, dp: f64| (dn * p - n.v * dp) / (p * p);
                Ok(SymbolGrad { dxi: [q(n.dxi[0], gpx[0]), q(n.dxi[1], gpx[1])], deta: [q(n.deta[0], gpe[0]), q(n.deta[1], gpe[1])] })
            }
        }
    }
}

pub fn eval_symbol(s: BilinearSymbol, pair: &FreqPair) -> Result<Complex64> {
    Ok(Complex64::new(s.eval(pair)?, 0.0))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Points in chunks of this size share one generator stream.
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub n: usize,
    pub seed: u64,
    pub eta_min: f64,
    pub max_key_residual: f64,
    pub max_euler_residual: f64,
    pub max_cubic_split_residual: f64,
    pub max_phi_form_gap: f64,
}

/// Random pairs with `ξ_i ∈ [−5, 5]` and `|η_i| ∈ [eta_min, 5]`.
pub fn sample_pairs(n: usize, seed: u64, eta_min: f64) -> Vec<FreqPair> {
    let chunks = n.div_ceil(CHUNK);
    let mut out = Vec::with_capacity(n);
    for c in 0..chunks {
        let mut r = rng_for(seed, c as u64);
        let m = CHUNK.min(n - c * CHUNK);
        for _ in 0..m {
            let mut eta_c = || {
                let mag = r.gen_range(eta_min..5.0);
                if r.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            };
            let eta = [eta_c(), eta_c()];
            let xi = [r.gen_range(-5.0..5.0), r.gen_range(-5.0..5.0)];
            out.push(FreqPair { xi, eta });
        }
    }
    out
}

pub fn identity_sweep(n: usize, seed: u64, eta_min: f64) -> IdentityReport {
    let pairs = sample_pairs(n, seed, eta_min);
    let mut rep = IdentityReport {
        n,
        seed,
        eta_min,
        max_key_residual: 0.0,
        max_euler_residual: 0.0,
        max_cubic_split_residual: 0.0,
        max_phi_form_gap: 0.0,
    };
    for p in &pairs {
        rep.max_key_residual = rep.max_key_residual.max(key_identity_residual(p));
        rep.max_euler_residual = rep.max_euler_residual.max(euler_residual(p));
        rep.max_cubic_split_residual = rep.max_cubic_split_residual.max(cubic_split_residual(p));
        rep.max_phi_form_gap = rep.max_phi_form_gap.max((eval_phi(p) - eval_phi_cubic(p)).abs() / p.cubic_scale());
    }
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenominatorReport {
    pub n: usize,
    pub seed: u64,
    pub min_ratio: f64,
    pub argmin_zeta: [f64; 2],
    pub argmin_sigma: [f64; 2],
}

/// Check `p(ζ+σ, σ) ≥ |ζ|² + |σ|²` on random points.
pub fn denominator_lower_bound_check(n: usize, seed: u64) -> DenominatorReport {
    denominator_lower_bound_check_with(n, seed, Execution::default())
}

pub fn denominator_lower_bound_check_with(n: usize, seed: u64, exec: Execution) -> DenominatorReport {
    let chunks = n.div_ceil(CHUNK);
    let parts = par::map_range(chunks, exec, |c| {
        let mut r = rng_for(seed, c as u64);
        let m = CHUNK.min(n - c * CHUNK);
        let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
        for _ in 0..m {
            let scale = 10f64.powf(r.gen_range(-3.0..3.0));
            let mut v = || r.gen_range(-1.0..1.0) * scale;
            let (z, s) = ([v(), v()], [v(), v()]);
            let den = z[0] * z[0] + z[1] * z[1] + s[0] * s[0] + s[1] * s[1];
            if den == 0.0 {
                continue;
            }
            let ratio = eval_p(&FreqPair::from_tilde(z, s)) / den;
            if ratio < best.0 {
                best = (ratio, z, s);
            }
        }
        best
    });
    let mut best = (f64::INFINITY, [0.0; 2], [0.0; 2]);
    for b in parts {
        if b.0 < best.0 {
            best = b;
        }
    }
    DenominatorReport { n, seed, min_ratio: best.0, argmin_zeta: best.1, argmin_sigma: best.2 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HmReport {
    pub symbol: String,
    pub max_order: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub radii: Vec<f64>,
    /// Multi-indices over `(ζ₁, ζ₂, σ₁, σ₂)`.
    pub multi_indices: Vec<[u8; 4]>,
    /// `c_beta[b][r]`: max over samples of `|∂^β s̃|·r^{|β|}` at radius `r`.
    pub c_beta: Vec<Vec<f64>>,
    /// Max over radii divided by min over radii, per multi-index.
    pub variation: Vec<f64>,
    pub pass: bool,
}

/// Spread below which a `C_β` table is treated as identically zero.
pub const HM_ZERO: f64 = 1e-9;
/// Largest admissible max/min ratio across radii.
pub const HM_MAX_VARIATION: f64 = 10.0;

fn multi_indices(max_order: usize) -> Vec<[u8; 4]> {
    let mut out = vec![[0u8; 4]];
    if max_order >= 1 {
        for a in 0..4 {
            let mut b = [0u8; 4];
            b[a] = 1;
            out.push(b);
        }
    }
    if max_order >= 2 {
        for a in 0..4 {
            for c in a..4 {
                let mut b = [0u8; 4];
                b[a] += 1;
                b[c] += 1;
                out.push(b);
            }
        }
    }
    out
}

/// Central difference of order `|β| ≤ 2` along the axes in `beta`, step `h`.
fn central_diff(f: &dyn Fn([f64; 4]) -> f64, x: [f64; 4], beta: [u8; 4], h: f64) -> f64 {
    let axes: Vec<usize> = (0..4).flat_map(|a| std::iter::repeat(a).take(beta[a] as usize)).collect();
    let shift = |mut p: [f64; 4], a: usize, d: f64| {
        p[a] += d;
        p
    };
    match axes.as_slice() {
        [] => f(x),
        [a] => (f(shift(x, *a, h)) - f(shift(x, *a, -h))) / (2.0 * h),
        [a, b] if a == b => (f(shift(x, *a, h)) - 2.0 * f(x) + f(shift(x, *a, -h))) / (h * h),
        [a, b] => {
            let pp = f(shift(shift(x, *a, h), *b, h));
            let pm = f(shift(shift(x, *a, h), *b, -h));
            let mp = f(shift(shift(x, *a, -h), *b, h));
            let mm = f(shift(shift(x, *a, -h), *b, -h));
            (pp - pm - mp + mm) / (4.0 * h * h)
        }
        _ => unreachable!(),
    }
}

/// Sampled Hörmander–Mihlin audit of `s̃(ζ, σ) = s(ζ+σ, σ)`.
pub fn hm_condition_check(s: BilinearSymbol, max_order: usize, n_samples: usize, seed: u64) -> Result<HmReport> {
    hm_condition_check_with(s, max_order, n_samples, seed, 11, Execution::default())
}

pub fn hm_condition_check_with(
    s: BilinearSymbol,
    max_order: usize,
    n_samples: usize,
    seed: u64,
    n_radii: usize,
    exec: Execution,
) -> Result<HmReport> {
    if max_order > 2 {
        return Err(ZkError::InvalidArgument("finite-difference audit supports orders up to 2".into()));
    }
    let radii = crate::fit::log_space(1e-2, 1e3, n_radii.max(2));
    let betas = multi_indices(max_order);
    let f = move |p: [f64; 4]| s.tilde_eval([p[0], p[1]], [p[2], p[3]]).unwrap_or(f64::NAN);
    let per_radius = par::map_range(radii.len(), exec, |ri| {
        let r = radii[ri];
        let mut rng = rng_for(seed, ri as u64);
        let mut c = vec![0.0f64; betas.len()];
        for _ in 0..n_samples {
            let u = loop {
                let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let n2: f64 = v.iter().map(|a| a * a).sum();
                if n2 > 1e-2 && n2 <= 1.0 {
                    let n = n2.sqrt();
                    break v.map(|a| a / n);
                }
            };
            let x = u.map(|a| a * r);
            for (bi, beta) in betas.iter().enumerate() {
                let order: u8 = beta.iter().sum();
                // Richardson extrapolation of the h² error term.
                let h = 1e-2 * r;
                let d1 = central_diff(&f, x, *beta, h);
                let d2 = central_diff(&f, x, *beta, 0.5 * h);
                let d = if order == 0 { d1 } else { (4.0 * d2 - d1) / 3.0 };
                c[bi] = c[bi].max(d.abs() * r.powi(order as i32));
            }
        }
        c
    });
    let c_beta: Vec<Vec<f64>> = (0..betas.len()).map(|b| per_radius.iter().map(|c| c[b]).collect()).collect();
    let variation: Vec<f64> = c_beta
        .iter()
        .map(|row| {
            let hi = row.iter().cloned().fold(0.0f64, f64::max);
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi <= HM_ZERO {
                1.0
            } else if lo == 0.0 {
                f64::INFINITY
            } else {
                hi / lo
            }
        })
        .collect();
    let pass = variation.iter().all(|v| *v < HM_MAX_VARIATION);
    Ok(HmReport { symbol: s.name(), max_order, n_samples, seed, radii, multi_indices: betas, c_beta, variation, pass })
}
