//! Periodic box, Fourier transforms, multipliers and dealiasing.
//!
//! Coefficients are stored in FFT order and referenced to the box center:
//! `c_m = (1/(nx·ny)) Σ_j f(x_j) e^{-i k_m·x_j}` with `x_j = -L/2 + j·L/N`.
//! With that convention `f(x) = Σ_m c_m e^{i k_m·x}` at every sample point,
//! derivative symbols are exact and the `L²` norm obeys
//! `‖f‖² = area · Σ |c_m|²`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, ZkError};
use crate::par::{self, Execution};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Hermitian defect above which `inverse` logs a warning.
pub const HERMITIAN_WARN: f64 = 1e-10;
/// Relative singular-set mass that makes a multiplier application fail.
pub const SINGULAR_FAIL: f64 = 1e-10;
/// Relative singular-set mass treated as numerical zero.
pub const SINGULAR_ZERO: f64 = 1e-13;

pub struct Grid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dealias_fraction: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
    keep_x: Vec<bool>,
    keep_y: Vec<bool>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .field("dealias_fraction", &self.dealias_fraction)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, o: &Self) -> bool {
        self.nx == o.nx && self.ny == o.ny && self.lx == o.lx && self.ly == o.ly && self.dealias_fraction == o.dealias_fraction
    }
}

/// Build a grid with the default 2/3 dealiasing rule.
pub fn make_grid(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Arc<Grid>> {
    Grid::new(nx, ny, lx, ly)
}

fn lattice(n: usize, l: f64) -> Vec<f64> {
    (0..n).map(|i| TWO_PI * mode_of(i, n) as f64 / l).collect()
}

fn mode_of(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Arc<Grid>> {
        Self::with_dealias(nx, ny, lx, ly, 2.0 / 3.0)
    }

    pub fn with_dealias(nx: usize, ny: usize, lx: f64, ly: f64, frac: f64) -> Result<Arc<Grid>> {
        for (n, name) in [(nx, "nx"), (ny, "ny")] {
            if n < 8 || n % 2 != 0 {
                return Err(ZkError::InvalidGrid(format!("{name} = {n} must be even and at least 8")));
            }
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(ZkError::InvalidGrid(format!("box sides must be positive, got {lx} x {ly}")));
        }
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(ZkError::InvalidGrid(format!("dealias fraction {frac} outside (0, 1]")));
        }
        // |m| <= frac * N/2, with a little slack so that 2/3 of 12 keeps |m| <= 4.
        let keep = |n: usize| -> Vec<bool> {
            let cut = frac * (n / 2) as f64 + 1e-9;
            (0..n).map(|i| (mode_of(i, n).abs() as f64) <= cut).collect()
        };
        let mut planner = FftPlanner::<f64>::new();
        Ok(Arc::new(Grid {
            nx,
            ny,
            lx,
            ly,
            dealias_fraction: frac,
            kx: lattice(nx, lx),
            ky: lattice(ny, ly),
            keep_x: keep(nx),
            keep_y: keep(ny),
            fft_x: planner.plan_fft_forward(nx),
            ifft_x: planner.plan_fft_inverse(nx),
            fft_y: planner.plan_fft_forward(ny),
            ifft_y: planner.plan_fft_inverse(ny),
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn cell_area(&self) -> f64 {
        self.area() / self.len() as f64
    }
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn dkx(&self) -> f64 {
        TWO_PI / self.lx
    }
    pub fn dky(&self) -> f64 {
        TWO_PI / self.ly
    }
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }
    pub fn ky(&self) -> &[f64] {
        &self.ky
    }
    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.lx + i as f64 * self.dx()
    }
    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.ly + j as f64 * self.dy()
    }
    /// Integer mode number of row `i`.
    pub fn mode_x(&self, i: usize) -> i64 {
        mode_of(i, self.nx)
    }
    pub fn mode_y(&self, j: usize) -> i64 {
        mode_of(j, self.ny)
    }
    /// Row index holding mode `m`, if it is on the lattice.
    pub fn index_x(&self, m: i64) -> Option<usize> {
        index_of(m, self.nx)
    }
    pub fn index_y(&self, m: i64) -> Option<usize> {
        index_of(m, self.ny)
    }
    pub fn keep_x(&self, i: usize) -> bool {
        self.keep_x[i]
    }
    pub fn keep_y(&self, j: usize) -> bool {
        self.keep_y[j]
    }
    /// Whether mode `(i, j)` survives dealiasing.
    pub fn keep(&self, i: usize, j: usize) -> bool {
        self.keep_x[i] && self.keep_y[j]
    }
    /// Largest retained mode number per axis.
    pub fn max_kept_mode(&self) -> (i64, i64) {
        let m = |keep: &[bool], n: usize| (0..n).filter(|&i| keep[i]).map(|i| mode_of(i, n).abs()).max().unwrap_or(0);
        (m(&self.keep_x, self.nx), m(&self.keep_y, self.ny))
    }
    /// Largest retained wavenumber per axis.
    pub fn max_kept_k(&self) -> (f64, f64) {
        let (mx, my) = self.max_kept_mode();
        (mx as f64 * self.dkx(), my as f64 * self.dky())
    }
    pub fn is_nyquist(&self, i: usize, j: usize) -> bool {
        i == self.nx / 2 || j == self.ny / 2
    }
    /// Same box and resolution, with a different number of modes per side.
    pub fn resized(&self, nx: usize, ny: usize) -> Result<Arc<Grid>> {
        Grid::with_dealias(nx, ny, self.lx, self.ly, self.dealias_fraction)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(ZkError::GridMismatch)
        }
    }
}

fn index_of(m: i64, n: usize) -> Option<usize> {
    let h = (n / 2) as i64;
    if m < -h || m >= h {
        None
    } else if m >= 0 {
        Some(m as usize)
    } else {
        Some((m + n as i64) as usize)
    }
}

#[derive(Clone, Debug)]
pub struct RealField {
    grid: Arc<Grid>,
    samples: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl RealField {
    pub fn new(grid: Arc<Grid>, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(ZkError::LengthMismatch { expected: grid.len(), got: samples.len() });
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(ZkError::NonFinite(i));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, samples: vec![0.0; n] }
    }

    /// Sample `f(x, y)` at the grid points.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut samples = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            let x = grid.x(i);
            for j in 0..grid.ny() {
                samples.push(f(x, grid.y(j)));
            }
        }
        Self { grid, samples }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.samples[i * self.grid.ny + j]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), samples: self.samples.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), samples })
    }

    /// Multiply by a function of position.
    pub fn weighted(&self, w: impl Fn(f64, f64) -> f64) -> Self {
        let g = &self.grid;
        let mut out = self.samples.clone();
        for i in 0..g.nx() {
            let x = g.x(i);
            for j in 0..g.ny() {
                out[i * g.ny() + j] *= w(x, g.y(j));
            }
        }
        Self { grid: self.grid.clone(), samples: out }
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl SpectralField {
    pub fn new(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(ZkError::LengthMismatch { expected: grid.len(), got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(ZkError::NonFinite(i));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Coefficients from a function of the wavenumber `(kx, ky)`.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut coeffs = Vec::with_capacity(grid.len());
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                coeffs.push(f(grid.kx[i], grid.ky[j]));
            }
        }
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.coeffs[i * self.grid.ny + j]
    }
    /// Coefficient of mode `(m1, m2)`; zero off the lattice.
    pub fn mode(&self, m1: i64, m2: i64) -> Complex64 {
        match (self.grid.index_x(m1), self.grid.index_y(m2)) {
            (Some(i), Some(j)) => self.at(i, j),
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|_, _, c| c * a)
    }

    /// Pointwise map with access to the wavenumber.
    pub fn map(&self, f: impl Fn(f64, f64, Complex64) -> Complex64) -> Self {
        let g = &self.grid;
        let mut out = self.coeffs.clone();
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                let idx = i * g.ny() + j;
                out[idx] = f(g.kx[i], g.ky[j], out[idx]);
            }
        }
        Self { grid: self.grid.clone(), coeffs: out }
    }

    pub fn zip_with(&self, other: &SpectralField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), coeffs })
    }

    pub fn add(&self, other: &SpectralField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `Σ |c|²` in index order.
    pub fn sum_sq(&self) -> f64 {
        par::ordered_sum(self.coeffs.iter().map(|c| c.norm_sqr()))
    }

    /// `L²` norm of the represented field via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.area() * self.sum_sq()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// `max |c(k) - conj c(-k)|` relative to `max |c|`, over non-Nyquist modes.
    pub fn hermitian_defect(&self) -> f64 {
        let g = &self.grid;
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                if g.is_nyquist(i, j) {
                    continue;
                }
                let (ni, nj) = ((g.nx() - i) % g.nx(), (g.ny() - j) % g.ny());
                worst = worst.max((self.at(i, j) - self.at(ni, nj).conj()).norm());
            }
        }
        worst / scale
    }

    /// Indices of modes with nonzero coefficients, in storage order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.coeffs.len()).filter(|&k| self.coeffs[k] != Complex64::new(0.0, 0.0)).collect()
    }
}

fn fft_rows(data: &mut [Complex64], n_inner: usize, plan: &Arc<dyn Fft<f64>>, exec: Execution) {
    par::for_each_chunk(data, n_inner, exec, |_, row| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(row, &mut scratch);
    });
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

fn fft2(data: &mut Vec<Complex64>, grid: &Grid, inverse: bool, exec: Execution) {
    let (fx, fy) = if inverse { (&grid.ifft_x, &grid.ifft_y) } else { (&grid.fft_x, &grid.fft_y) };
    fft_rows(data, grid.ny, fy, exec);
    let mut t = transpose(data, grid.nx, grid.ny);
    fft_rows(&mut t, grid.nx, fx, exec);
    *data = transpose(&t, grid.ny, grid.nx);
}

#[inline]
fn center_sign(grid: &Grid, i: usize, j: usize) -> f64 {
    if (grid.mode_x(i) + grid.mode_y(j)).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward(f: &RealField) -> SpectralField {
    forward_with(f, Execution::default())
}

pub fn forward_with(f: &RealField, exec: Execution) -> SpectralField {
    let g = &f.grid;
    let mut data: Vec<Complex64> = f.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut data, g, false, exec);
    let norm = 1.0 / g.len() as f64;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            data[i * g.ny() + j] *= center_sign(g, i, j) * norm;
        }
    }
    SpectralField { grid: g.clone(), coeffs: data }
}

/// Coefficients of complex samples; the inverse of [`inverse_complex`].
pub fn forward_complex(grid: &Arc<Grid>, samples: Vec<Complex64>, exec: Execution) -> Result<SpectralField> {
    if samples.len() != grid.len() {
        return Err(ZkError::LengthMismatch { expected: grid.len(), got: samples.len() });
    }
    let mut data = samples;
    fft2(&mut data, grid, false, exec);
    let norm = 1.0 / grid.len() as f64;
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            data[i * grid.ny() + j] *= center_sign(grid, i, j) * norm;
        }
    }
    SpectralField::new(grid.clone(), data)
}

/// Complex samples of the trigonometric polynomial with coefficients `F`.
pub fn inverse_complex(f: &SpectralField, exec: Execution) -> Vec<Complex64> {
    let g = &f.grid;
    let mut data = f.coeffs.clone();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            data[i * g.ny() + j] *= center_sign(g, i, j);
        }
    }
    fft2(&mut data, g, true, exec);
    data
}

pub fn inverse(f: &SpectralField) -> RealField {
    inverse_with(f, Execution::default())
}

pub fn inverse_with(f: &SpectralField, exec: Execution) -> RealField {
    let data = inverse_complex(f, exec);
    let scale = data.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let imag = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if scale > 0.0 && imag > HERMITIAN_WARN * scale {
        log::warn!("inverse transform discards imaginary residue {:.3e} (relative)", imag / scale);
    }
    RealField { grid: f.grid.clone(), samples: data.iter().map(|c| c.re).collect() }
}

/// Where a multiplier symbol is undefined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SingularSet {
    None,
    /// `kx = 0`.
    AxisX,
    /// `ky = 0`.
    AxisY,
    /// `kx = 0` or `ky = 0`.
    Axes,
    /// `k = 0` only.
    Origin,
}

impl SingularSet {
    pub fn contains(self, kx: f64, ky: f64) -> bool {
        match self {
            SingularSet::None => false,
            SingularSet::AxisX => kx == 0.0,
            SingularSet::AxisY => ky == 0.0,
            SingularSet::Axes => kx == 0.0 || ky == 0.0,
            SingularSet::Origin => kx == 0.0 && ky == 0.0,
        }
    }

    fn union(self, other: SingularSet) -> SingularSet {
        use SingularSet::*;
        match (self, other) {
            (None, s) | (s, None) => s,
            (Axes, _) | (_, Axes) | (AxisX, AxisY) | (AxisY, AxisX) => Axes,
            (AxisX, _) | (_, AxisX) => AxisX,
            (AxisY, _) | (_, AxisY) => AxisY,
            (Origin, Origin) => Origin,
        }
    }
}

type Symbol = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

/// A Fourier multiplier `c(k) ↦ s(k)·c(k)`.
#[derive(Clone)]
pub struct FourierMultiplier {
    name: String,
    symbol: Arc<Symbol>,
    singular: SingularSet,
}

impl fmt::Debug for FourierMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierMultiplier").field("name", &self.name).field("singular", &self.singular).finish()
    }
}

/// `(i k)^a` on the principal branch.
fn principal(k: f64, a: f64) -> Complex64 {
    if a == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    if k == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let arg = a * std::f64::consts::FRAC_PI_2 * k.signum();
    Complex64::from_polar(k.abs().powf(a), arg)
}

fn abs_pow(k: f64, a: f64) -> f64 {
    if a == 0.0 {
        1.0
    } else if k == 0.0 {
        0.0
    } else {
        k.abs().powf(a)
    }
}

fn power_singular(ax: f64, ay: f64) -> SingularSet {
    match (ax < 0.0, ay < 0.0) {
        (true, true) => SingularSet::Axes,
        (true, false) => SingularSet::AxisX,
        (false, true) => SingularSet::AxisY,
        (false, false) => SingularSet::None,
    }
}

impl FourierMultiplier {
    pub fn new(name: impl Into<String>, singular: SingularSet, symbol: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), symbol: Arc::new(symbol), singular }
    }

    pub fn identity() -> Self {
        Self::new("1", SingularSet::None, |_, _| Complex64::new(1.0, 0.0))
    }

    /// `∂x^a ∂y^b` for nonnegative integer orders.
    pub fn derivative(a: u32, b: u32) -> Self {
        Self::new(format!("d1^{a} d2^{b}"), SingularSet::None, move |kx, ky| {
            Complex64::new(0.0, kx).powu(a) * Complex64::new(0.0, ky).powu(b)
        })
    }

    /// `|kx|^a |ky|^b`; negative exponents are singular on the matching axis.
    pub fn abs_power(a: f64, b: f64) -> Self {
        Self::new(format!("|k1|^{a} |k2|^{b}"), power_singular(a, b), move |kx, ky| Complex64::new(abs_pow(kx, a) * abs_pow(ky, b), 0.0))
    }

    /// `(i kx)^a (i ky)^b` on the principal branch.
    pub fn principal_power(a: f64, b: f64) -> Self {
        Self::new(format!("(ik1)^{a} (ik2)^{b}"), power_singular(a, b), move |kx, ky| principal(kx, a) * principal(ky, b))
    }

    /// Bessel potential `<∇>^s = (1 + |k|²)^{s/2}`.
    pub fn bessel(s: f64) -> Self {
        Self::new(format!("<D>^{s}"), SingularSet::None, move |kx, ky| Complex64::new((1.0 + kx * kx + ky * ky).powf(0.5 * s), 0.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn singular_set(&self) -> SingularSet {
        self.singular
    }

    /// Symbol value; callers must avoid the singular set.
    pub fn symbol(&self, kx: f64, ky: f64) -> Complex64 {
        (self.symbol)(kx, ky)
    }

    pub fn then(&self, other: &FourierMultiplier) -> Self {
        let (a, b) = (self.symbol.clone(), other.symbol.clone());
        Self {
            name: format!("{} {}", other.name, self.name),
            symbol: Arc::new(move |kx, ky| a(kx, ky) * b(kx, ky)),
            singular: self.singular.union(other.singular),
        }
    }

    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField> {
        apply_multiplier(self, f)
    }
}

/// Pointwise multiplication by the symbol. Nyquist rows use the real part
/// of the symbol so real fields stay real. Coefficients on the singular
/// set are set to zero; carrying mass there is an error.
pub fn apply_multiplier(m: &FourierMultiplier, f: &SpectralField) -> Result<SpectralField> {
    let g = f.grid.clone();
    if m.singular != SingularSet::None {
        let (mut on, mut total) = (0.0, 0.0);
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                let w = f.at(i, j).norm_sqr();
                total += w;
                if m.singular.contains(g.kx[i], g.ky[j]) {
                    on += w;
                }
            }
        }
        let mass = if total > 0.0 { (on / total).sqrt() } else { 0.0 };
        if mass >= SINGULAR_FAIL {
            return Err(ZkError::SingularSupport { name: m.name.clone(), mass });
        }
        if mass > SINGULAR_ZERO {
            log::warn!("`{}`: dropping relative mass {mass:.3e} on the singular set", m.name);
        }
    }
    let mut out = f.coeffs.clone();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let (kx, ky) = (g.kx[i], g.ky[j]);
            let idx = i * g.ny() + j;
            if m.singular.contains(kx, ky) {
                out[idx] = Complex64::new(0.0, 0.0);
                continue;
            }
            let mut s = m.symbol(kx, ky);
            if g.is_nyquist(i, j) {
                s = Complex64::new(s.re, 0.0);
            }
            out[idx] *= s;
        }
    }
    Ok(SpectralField { grid: g, coeffs: out })
}

/// Zero every mode outside the retained band.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let g = &f.grid;
    let mut out = f.coeffs.clone();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if !g.keep(i, j) {
                out[i * g.ny() + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
    SpectralField { grid: g.clone(), coeffs: out }
}

pub fn dealias_in_place(f: &mut SpectralField) {
    let g = f.grid.clone();
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if !g.keep(i, j) {
                f.coeffs[i * g.ny() + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Pointwise product in space with the spectrum of the result dealiased.
pub fn product(f: &RealField, g: &RealField) -> Result<RealField> {
    let raw = f.zip_with(g, |a, b| a * b)?;
    Ok(inverse(&dealias(&forward(&raw))))
}

/// Band-limited interpolation onto a finer grid with the same box, by
/// zero padding. `factor` must be a positive integer.
pub fn upsample(f: &SpectralField, factor: usize) -> Result<SpectralField> {
    if factor == 0 {
        return Err(ZkError::InvalidArgument("upsampling factor must be positive".into()));
    }
    let g = &f.grid;
    let fine = g.resized(g.nx() * factor, g.ny() * factor)?;
    let mut out = SpectralField::zeros(fine.clone());
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            let c = f.at(i, j);
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (m1, m2) = (g.mode_x(i), g.mode_y(j));
            // A Nyquist coefficient stands for a cosine: split it over ±N/2.
            let xs: Vec<(i64, f64)> = if i == g.nx() / 2 && factor > 1 { vec![(m1, 0.5), (-m1, 0.5)] } else { vec![(m1, 1.0)] };
            let ys: Vec<(i64, f64)> = if j == g.ny() / 2 && factor > 1 { vec![(m2, 0.5), (-m2, 0.5)] } else { vec![(m2, 1.0)] };
            for &(a, wa) in &xs {
                for &(b, wb) in &ys {
                    let (fi, fj) = (fine.index_x(a).unwrap(), fine.index_y(b).unwrap());
                    out.coeffs[fi * fine.ny() + fj] += c * wa * wb;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn lattice_matches_definition() {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let mut k: Vec<f64> = g.kx().to_vec();
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(k, vec![-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        let g = make_grid(16, 16, 32.0 * PI, 32.0 * PI).unwrap();
        assert!((g.dkx() - 1.0 / 16.0).abs() < 1e-15);
        assert!(make_grid(7, 8, 1.0, 1.0).is_err());
        assert!(make_grid(6, 8, 1.0, 1.0).is_err());
        assert!(make_grid(8, 8, 0.0, 1.0).is_err());
    }

    #[test]
    fn mask_is_two_thirds() {
        let g = make_grid(12, 12, 1.0, 1.0).unwrap();
        assert_eq!(g.max_kept_mode(), (4, 4));
        let g = make_grid(64, 64, 1.0, 1.0).unwrap();
        assert_eq!(g.max_kept_mode(), (21, 21));
        let g = Grid::with_dealias(8, 8, 1.0, 1.0, 1.0).unwrap();
        assert!((0..8).all(|i| g.keep_x(i)));
    }

    #[test]
    fn constant_and_cosine() {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let f = forward(&RealField::from_fn(g.clone(), |_, _| 2.5));
        assert!((f.mode(0, 0) - Complex64::new(2.5, 0.0)).norm() < 1e-15);
        assert!(f.coeffs().iter().skip(1).all(|c| c.norm() < 1e-15));

        let f = forward(&RealField::from_fn(g.clone(), |x, _| x.cos()));
        for i in 0..8 {
            for j in 0..8 {
                let expect = if j == 0 && g.mode_x(i).abs() == 1 { 0.5 } else { 0.0 };
                assert!((f.at(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
        let back = inverse(&f);
        for (a, (i, j)) in back.samples().iter().zip((0..8).flat_map(|i| (0..8).map(move |j| (i, j)))) {
            let _ = j;
            assert!((a - g.x(i).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_cosine() {
        let g = make_grid(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let f = forward(&RealField::from_fn(g.clone(), |x, _| x.cos()));
        let d = inverse(&FourierMultiplier::derivative(1, 0).apply(&f).unwrap());
        let exact = RealField::from_fn(g, |x, _| -x.sin());
        for (a, b) in d.samples().iter().zip(exact.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_support_is_rejected() {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let f = forward(&RealField::from_fn(g, |_, y| 1.0 + y.cos()));
        let err = FourierMultiplier::abs_power(-1.0, 0.0).apply(&f).unwrap_err();
        assert!(matches!(err, ZkError::SingularSupport { .. }));
    }

    #[test]
    fn square_of_cosine() {
        let g = make_grid(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        let c = RealField::from_fn(g.clone(), |x, _| x.cos());
        let p = product(&c, &c).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let x = g.x(i);
                assert!((p.at(i, j) - (0.5 + 0.5 * (2.0 * x).cos())).abs() < 1e-14);
            }
        }
        let one = RealField::from_fn(g, |_, _| 1.0);
        let q = product(&c, &one).unwrap();
        for (a, b) in q.samples().iter().zip(c.samples()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    /// Direct circular convolution on an 8×8 grid as the product oracle.
    #[test]
    fn dealiased_product_matches_truncated_convolution() {
        let g = make_grid(8, 8, 2.0 * PI, 2.0 * PI).unwrap();
        let f = RealField::from_fn(g.clone(), |x, y| (2.0 * x).cos() + (2.0 * y + 0.3).sin());
        let h = RealField::from_fn(g.clone(), |x, y| (2.0 * x - y).sin() + 0.5);
        let (ff, hh) = (forward(&f), forward(&h));
        let p = forward(&product(&f, &h).unwrap());
        for i in 0..8 {
            for j in 0..8 {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..8 {
                    for b in 0..8 {
                        let (ci, cj) = ((i + 8 - a) % 8, (j + 8 - b) % 8);
                        acc += ff.at(ci, cj) * hh.at(a, b);
                    }
                }
                let expect = if g.keep(i, j) { acc } else { Complex64::new(0.0, 0.0) };
                assert!((p.at(i, j) - expect).norm() < 1e-14, "mode ({i},{j})");
            }
        }
    }

    #[test]
    fn upsample_preserves_values() {
        let g = make_grid(16, 16, 10.0, 10.0).unwrap();
        let f = RealField::from_fn(g.clone(), |x, y| (-(x * x + y * y) / 2.0).exp());
        let up = inverse(&upsample(&forward(&f), 4).unwrap());
        for i in 0..16 {
            for j in 0..16 {
                assert!((up.at(4 * i, 4 * j) - f.at(i, j)).abs() < 1e-13);
            }
        }
        let d = dealias(&forward(&f));
        assert!(rel(d.l2_norm(), upsample(&d, 4).unwrap().l2_norm()) < 1e-13);
    }
}
