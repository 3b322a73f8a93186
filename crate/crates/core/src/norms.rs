//! Lebesgue and Sobolev norms, the weighted final-data norms `X` and `Z`,
//! and the spectral-support certificate for final data.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::grid::{forward, inverse, FourierMultiplier, RealField, SpectralField};
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Three,
    Inf,
}

/// Riemann-sum `Lᵖ` norm with cell weight `dx·dy`; `p = ∞` is the grid max.
pub fn lp_norm(f: &RealField, p: Exponent) -> f64 {
    let w = f.grid().cell_area();
    let s = f.samples();
    match p {
        Exponent::One => w * par::ordered_sum(s.iter().map(|v| v.abs())),
        Exponent::Two => (w * par::ordered_sum(s.iter().map(|v| v * v))).sqrt(),
        Exponent::Three => (w * par::ordered_sum(s.iter().map(|v| v.abs().powi(3)))).cbrt(),
        Exponent::Inf => f.max_abs(),
    }
}

/// `‖<∇>ˢ f‖_{Lᵖ}`. The `p = 2` case is evaluated on the Fourier side,
/// which equals the Riemann sum by Parseval.
pub fn sobolev_norm(f: &SpectralField, s: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Two => {
            let g = f.grid();
            let mut acc = 0.0;
            for i in 0..g.nx() {
                let k1 = g.kx()[i];
                for j in 0..g.ny() {
                    let k2 = g.ky()[j];
                    acc += (1.0 + k1 * k1 + k2 * k2).powf(s) * f.at(i, j).norm_sqr();
                }
            }
            (g.area() * acc).sqrt()
        }
        _ => {
            let filtered = FourierMultiplier::bessel(s).apply(f).expect("Bessel potential is regular");
            lp_norm(&inverse(&filtered), p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub k_lo: f64,
    pub k_hi: f64,
    pub axis_gap: f64,
}

impl Annulus {
    pub fn contains(&self, k1: f64, k2: f64) -> bool {
        let r = (k1 * k1 + k2 * k2).sqrt();
        r >= self.k_lo && r <= self.k_hi && k1.abs() >= self.axis_gap && k2.abs() >= self.axis_gap
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormComponent {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub components: Vec<NormComponent>,
    pub total: f64,
    /// Largest `L²` fraction of a weighted component beyond `0.4·min(lx, ly)`.
    pub max_tail_fraction: f64,
}

impl NormReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.components.iter().find(|c| c.name == name).map(|c| c.value)
    }
    pub fn localized(&self) -> bool {
        self.max_tail_fraction <= TAIL_MAX
    }
}

/// Admissible weighted tail.
pub const TAIL_MAX: f64 = 1e-8;
/// Out-of-support mass that [`certify`] silently removes.
pub const CERT_DROP: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flavor {
    X,
    Z,
}

struct Term {
    label: &'static str,
    weighted: bool,
    a1: f64,
    a2: f64,
}

const TERMS: [Term; 7] = [
    Term { label: "<x> d1^(-1/2) d2^(-1/2) f", weighted: true, a1: -0.5, a2: -0.5 },
    Term { label: "<x> d1^(-1) f", weighted: true, a1: -1.0, a2: 0.0 },
    Term { label: "<x> d2^(-1) f", weighted: true, a1: 0.0, a2: -1.0 },
    Term { label: "<x> d1 d2^(-2) f", weighted: true, a1: 1.0, a2: -2.0 },
    Term { label: "<x> d1^(-2) d2 f", weighted: true, a1: -2.0, a2: 1.0 },
    Term { label: "d1^(-2) f", weighted: false, a1: -2.0, a2: 0.0 },
    Term { label: "d2^(-2) f", weighted: false, a1: 0.0, a2: -2.0 },
];

fn space_label(first: bool, flavor: Flavor) -> &'static str {
    match (first, flavor) {
        (true, Flavor::X) => "W^{3,1}",
        (false, Flavor::X) => "H^3",
        (true, Flavor::Z) => "L^1",
        (false, Flavor::Z) => "L^2",
    }
}

/// Stable component names, in summation order.
pub fn component_names(z: bool) -> Vec<String> {
    let flavor = if z { Flavor::Z } else { Flavor::X };
    TERMS.iter().enumerate().map(|(n, t)| format!("{} | {}", t.label, space_label(n == 0, flavor))).collect()
}

fn tail_fraction(h: &RealField) -> f64 {
    let g = h.grid();
    let r = 0.4 * g.lx().min(g.ly());
    let (mut out, mut tot) = (0.0, 0.0);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let v = h.at(i, j) * h.at(i, j);
            tot += v;
            if g.x(i).hypot(g.y(j)) > r {
                out += v;
            }
        }
    }
    if tot == 0.0 {
        0.0
    } else {
        (out / tot).sqrt()
    }
}

fn weighted_norms(f: &SpectralField, flavor: Flavor, exec: Execution) -> Result<NormReport> {
    let names = component_names(flavor == Flavor::Z);
    let parts = par::try_map_range(TERMS.len(), exec, |n| -> Result<(f64, f64)> {
        let t = &TERMS[n];
        if !t.weighted {
            let g = FourierMultiplier::abs_power(t.a1, t.a2).apply(f)?;
            let v = match flavor {
                Flavor::X => sobolev_norm(&g, 3.0, Exponent::Two),
                Flavor::Z => g.l2_norm(),
            };
            return Ok((v, 0.0));
        }
        let g = FourierMultiplier::principal_power(t.a1, t.a2).apply(f)?;
        let h = inverse(&g).weighted(|x, y| (1.0 + x * x + y * y).sqrt());
        let tail = tail_fraction(&h);
        let v = match (n == 0, flavor) {
            (true, Flavor::X) => sobolev_norm(&forward(&h), 3.0, Exponent::One),
            (false, Flavor::X) => sobolev_norm(&forward(&h), 3.0, Exponent::Two),
            (true, Flavor::Z) => lp_norm(&h, Exponent::One),
            (false, Flavor::Z) => lp_norm(&h, Exponent::Two),
        };
        Ok((v, tail))
    })?;
    let components: Vec<NormComponent> = names.into_iter().zip(&parts).map(|(name, &(value, _))| NormComponent { name, value }).collect();
    let total = par::ordered_sum(components.iter().map(|c| c.value));
    let max_tail_fraction = parts.iter().fold(0.0f64, |m, p| m.max(p.1));
    if max_tail_fraction > TAIL_MAX {
        log::warn!("weighted norm components reach the box edge (tail fraction {max_tail_fraction:.2e})");
    }
    Ok(NormReport { components, total, max_tail_fraction })
}

/// Final data with a verified spectral-support certificate.
#[derive(Clone, Debug)]
pub struct FinalData {
    field: SpectralField,
    annulus: Annulus,
    x: NormReport,
    z: NormReport,
}

impl FinalData {
    pub fn field(&self) -> &SpectralField {
        &self.field
    }
    pub fn annulus(&self) -> Annulus {
        self.annulus
    }
    pub fn x_norm(&self) -> f64 {
        self.x.total
    }
    pub fn z_norm(&self) -> f64 {
        self.z.total
    }
    pub fn x_report(&self) -> &NormReport {
        &self.x
    }
    pub fn z_report(&self) -> &NormReport {
        &self.z
    }

    /// Same certificate for `a·field`; norms rescale exactly.
    pub fn scaled(&self, a: f64) -> FinalData {
        let scale = |r: &NormReport| NormReport {
            components: r.components.iter().map(|c| NormComponent { name: c.name.clone(), value: c.value * a.abs() }).collect(),
            total: r.total * a.abs(),
            max_tail_fraction: r.max_tail_fraction,
        };
        FinalData { field: self.field.scale(a), annulus: self.annulus, x: scale(&self.x), z: scale(&self.z) }
    }
}

pub fn x_norm(f: &FinalData) -> NormReport {
    f.x.clone()
}

pub fn z_norm(f: &FinalData) -> NormReport {
    f.z.clone()
}

/// Compute the `X` report for any field off the axes.
pub fn x_report(f: &SpectralField) -> Result<NormReport> {
    weighted_norms(f, Flavor::X, Execution::default())
}

pub fn z_report(f: &SpectralField) -> Result<NormReport> {
    weighted_norms(f, Flavor::Z, Execution::default())
}

/// Check that `field` lives in the annulus with the axis gap, drop the
/// negligible remainder, and cache both weighted norms.
pub fn certify(field: &SpectralField, k_lo: f64, k_hi: f64, axis_gap: f64) -> Result<FinalData> {
    let annulus = Annulus { k_lo, k_hi, axis_gap };
    let g = field.grid();
    let (mut out, mut tot) = (0.0, 0.0);
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let w = field.at(i, j).norm_sqr();
            tot += w;
            if !annulus.contains(g.kx()[i], g.ky()[j]) {
                out += w;
            }
        }
    }
    let fraction = if tot == 0.0 { 0.0 } else { (out / tot).sqrt() };
    if fraction > CERT_DROP {
        return Err(ZkError::Certificate { fraction });
    }
    let clean = field.map(|k1, k2, c| if annulus.contains(k1, k2) { c } else { c * 0.0 });
    let x = weighted_norms(&clean, Flavor::X, Execution::default())?;
    let z = weighted_norms(&clean, Flavor::Z, Execution::default())?;
    Ok(FinalData { field: clean, annulus, x, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{band_pass, BandSpec};
    use crate::grid::make_grid;
    use num_complex::Complex64;

    #[test]
    fn constant_field() {
        let g = make_grid(8, 8, 2.0, 3.0).unwrap();
        let f = RealField::from_fn(g, |_, _| 2.0);
        assert!((lp_norm(&f, Exponent::One) - 12.0).abs() < 1e-13);
        assert!((lp_norm(&f, Exponent::Two) - 2.0 * 6f64.sqrt()).abs() < 1e-13);
        assert!((lp_norm(&f, Exponent::Three) - 2.0 * 6f64.cbrt()).abs() < 1e-13);
        assert_eq!(lp_norm(&f, Exponent::Inf), 2.0);
    }

    #[test]
    fn single_harmonic_h1() {
        let g = make_grid(16, 16, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI).unwrap();
        let f = forward(&RealField::from_fn(g, |x, _| x.cos()));
        assert!((sobolev_norm(&f, 1.0, Exponent::Two) - 2f64.sqrt() * f.l2_norm()).abs() < 1e-13);
    }

    #[test]
    fn certificate_rules() {
        let g = make_grid(32, 32, 40.0, 40.0).unwrap();
        let dc = SpectralField::from_fn(g.clone(), |k1, k2| Complex64::new(if k1 == 0.0 && k2 == 0.0 { 1.0 } else { 0.0 }, 0.0));
        assert!(matches!(certify(&dc, 0.1, 2.0, 0.1), Err(ZkError::Certificate { .. })));
        let spec = BandSpec { gap_lo: 0.2, gap_hi: 0.5, flat: 0.8, cut: 1.2 };
        let (lo, hi, gap) = spec.annulus();
        let f = band_pass(g.clone(), spec);
        let ok = certify(&f, lo, hi, gap).unwrap();
        assert!(ok.x_norm() > 0.0 && ok.z_norm() > 0.0);
        let leaked = f.add(&dc.scale(1e-10 * f.l2_norm() / dc.l2_norm())).unwrap();
        assert!(matches!(certify(&leaked, lo, hi, gap), Err(ZkError::Certificate { .. })));
    }
}
