//! Nonlinear evolution, conservation monitors and the final-state
//! construction `v = v₁ + v₂ + w`.
//!
//! The forward solver is integrating-factor RK4: the dispersive part is an
//! exact Fourier phase and RK4 only sees the quadratic term. The final-state
//! solver runs Picard iteration on the backward Duhamel map for `w` in the
//! interaction picture `W(t) = V(−t)w(t)`, where
//!
//! ```text
//! W(t) = −∫_t^T V(−τ) N(τ) dτ,
//! N = (∂₁+∂₂)[w² + 2(v₁+v₂)w + 2v₁v₂ + v₂²].
//! ```

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bilinear::{build_v2_with, V2Config};
use crate::error::{Result, ZkError};
use crate::fit::loglog_fit;
use crate::grid::{forward_with, inverse_with, Grid, RealField, SpectralField};
use crate::norms::{lp_norm, sobolev_norm, Exponent, FinalData};
use crate::par::{self, Execution};
use crate::propagator::propagate;
use crate::quad::{gauss_legendre, tail_integration_matrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    /// `∂_t v + (∂₁³+∂₂³)v = (∂₁+∂₂)(v²)`.
    #[default]
    Symmetric,
    /// `∂_t u + ∂ₓ³u + ∂ₓ∂_y²u = ∂ₓ(u²)`.
    Physical,
}

impl Equation {
    /// Linear phase speed: coefficients evolve as `e^{itΩ(k)}`.
    pub fn linear_symbol(self, k1: f64, k2: f64) -> f64 {
        match self {
            Equation::Symmetric => k1 * k1 * k1 + k2 * k2 * k2,
            Equation::Physical => k1 * k1 * k1 + k1 * k2 * k2,
        }
    }

    /// Derivative in front of the square, as a multiple of `i`.
    pub fn flux_symbol(self, k1: f64, k2: f64) -> f64 {
        match self {
            Equation::Symmetric => k1 + k2,
            Equation::Physical => k1,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    IfRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "yes")]
    pub dealias: bool,
    pub t_begin: f64,
    pub t_end: f64,
    #[serde(default)]
    pub equation: Equation,
    #[serde(skip)]
    pub exec: Execution,
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn new(dt: f64, t_begin: f64, t_end: f64) -> Self {
        Self { dt, scheme: Scheme::IfRk4, dealias: true, t_begin, t_end, equation: Equation::Symmetric, exec: Execution::default() }
    }
    pub fn with_equation(mut self, eq: Equation) -> Self {
        self.equation = eq;
        self
    }
    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }
}

/// Largest step with `max|v|·max|k|·dt ≤ cfl` over the retained band.
pub fn cfl_time_step(v: &SpectralField, cfl: f64) -> f64 {
    let g = v.grid();
    let (kx, ky) = g.max_kept_k();
    let umax = inverse_with(v, Execution::Sequential).max_abs();
    if umax == 0.0 {
        return f64::INFINITY;
    }
    cfl / (umax * kx.hypot(ky))
}

/// `(∂₁+∂₂)(v²)` with the square dealiased.
pub fn rhs_nonlinear(v: &RealField) -> RealField {
    let g = v.grid().clone();
    let ops = Operators::new(&g, Equation::Symmetric, 0.0, true);
    let sq = v.map(|x| x * x);
    let mut s = forward_with(&sq, Execution::Sequential);
    ops.apply_flux(&mut s);
    inverse_with(&s, Execution::Sequential)
}

/// Precomputed per-mode factors for one grid, equation and step.
struct Operators {
    grid: Arc<Grid>,
    flux: Vec<Complex64>,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
}

impl Operators {
    fn new(g: &Arc<Grid>, eq: Equation, h: f64, dealias: bool) -> Self {
        let n = g.len();
        let (mut flux, mut half, mut full) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                let (k1, k2) = (g.kx()[i], g.ky()[j]);
                let idx = i * g.ny() + j;
                let w = eq.linear_symbol(k1, k2);
                half[idx] = Complex64::from_polar(1.0, 0.5 * h * w);
                full[idx] = Complex64::from_polar(1.0, h * w);
                // Odd derivatives vanish on Nyquist rows.
                let keep = !dealias || g.keep(i, j);
                if keep && !g.is_nyquist(i, j) {
                    flux[idx] = Complex64::new(0.0, eq.flux_symbol(k1, k2));
                }
            }
        }
        Self { grid: g.clone(), flux, half, full }
    }

    fn apply_flux(&self, s: &mut SpectralField) {
        for (c, d) in s.coeffs_mut().iter_mut().zip(&self.flux) {
            *c *= d;
        }
    }

    fn nonlinear(&self, v: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let f = SpectralField::new(self.grid.clone(), v.to_vec()).expect("grid-sized state");
        let r = inverse_with(&f, exec);
        let sq = r.map(|x| x * x);
        let mut s = forward_with(&sq, exec);
        self.apply_flux(&mut s);
        s.into_coeffs()
    }

    fn rk4(&self, v: &SpectralField, h: f64, exec: Execution) -> Vec<Complex64> {
        let c = v.coeffs();
        let n = c.len();
        let k1 = self.nonlinear(c, exec);
        let a: Vec<Complex64> = (0..n).map(|m| self.half[m] * (c[m] + 0.5 * h * k1[m])).collect();
        let k2 = self.nonlinear(&a, exec);
        let b: Vec<Complex64> = (0..n).map(|m| self.half[m] * c[m] + 0.5 * h * k2[m]).collect();
        let k3 = self.nonlinear(&b, exec);
        let d: Vec<Complex64> = (0..n).map(|m| self.full[m] * c[m] + h * self.half[m] * k3[m]).collect();
        let k4 = self.nonlinear(&d, exec);
        (0..n).map(|m| self.full[m] * c[m] + h / 6.0 * (self.full[m] * k1[m] + 2.0 * self.half[m] * (k2[m] + k3[m]) + k4[m])).collect()
    }
}

/// Amplitude beyond which a state counts as blown up.
pub const BLOWUP_MAX: f64 = 1e150;

fn blown_up(c: &[Complex64]) -> bool {
    c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite() || z.norm() > BLOWUP_MAX)
}

/// One IF-RK4 step of size `dt` (negative steps integrate backwards).
pub fn step(v: &SpectralField, dt: f64, cfg: &SolverConfig) -> Result<SpectralField> {
    if dt == 0.0 {
        return Ok(v.clone());
    }
    let ops = Operators::new(v.grid(), cfg.equation, dt, cfg.dealias);
    let out = ops.rk4(v, dt, cfg.exec);
    if blown_up(&out) {
        return Err(ZkError::Blowup { t: cfg.t_begin + dt, last_good: Box::new(v.clone()) });
    }
    SpectralField::new(v.grid().clone(), out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Monitor {
    Mass,
    L2,
    /// `½∫|∇u|² + c∫u³` in the frame of the evolved field.
    Energy {
        cubic: f64,
    },
    /// The physical energy pulled back to the symmetric frame.
    SymmetricEnergy {
        cubic: f64,
    },
}

impl Monitor {
    pub fn name(&self) -> String {
        match self {
            Monitor::Mass => "mass".into(),
            Monitor::L2 => "l2".into(),
            Monitor::Energy { cubic } => format!("energy[c={cubic}]"),
            Monitor::SymmetricEnergy { cubic } => format!("symmetric_energy[c={cubic}]"),
        }
    }

    pub fn eval(&self, v: &SpectralField) -> f64 {
        match *self {
            Monitor::Mass => mass(v),
            Monitor::L2 => v.l2_norm(),
            Monitor::Energy { cubic } => energy_spectral(v, cubic),
            Monitor::SymmetricEnergy { cubic } => symmetric_energy(v, cubic),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSeries {
    pub monitor: Monitor,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MonitorSeries {
    /// `max|q(t) − q(0)| / scale`, with `scale` the initial modulus unless
    /// it is zero.
    pub fn drift_relative_to(&self, scale: f64) -> f64 {
        let q0 = self.values.first().copied().unwrap_or(0.0);
        let d = self.values.iter().fold(0.0f64, |m, q| m.max((q - q0).abs()));
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    }

    pub fn relative_drift(&self) -> f64 {
        self.drift_relative_to(self.values.first().map_or(0.0, |q| q.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Monitors are sampled every `monitor_stride` steps and at the end.
    pub monitor_stride: usize,
    /// Times at which to keep the state; rounded to the nearest step.
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, SpectralField)>,
    pub monitors: Vec<MonitorSeries>,
    pub steps: usize,
    pub dt: f64,
    pub last: SpectralField,
}

pub fn solve(v0: &SpectralField, cfg: &SolverConfig, monitors: &[Monitor], opts: &SolveOptions) -> Result<Trajectory> {
    let span = cfg.t_end - cfg.t_begin;
    if !(cfg.dt.is_finite() && cfg.dt != 0.0) || !span.is_finite() {
        return Err(ZkError::InvalidTime(format!("dt = {}, span = {span}", cfg.dt)));
    }
    let steps = if span == 0.0 { 0 } else { ((span.abs() / cfg.dt.abs()) - 1e-9).ceil().max(1.0) as usize };
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };
    let ops = Operators::new(v0.grid(), cfg.equation, h, cfg.dealias);
    let snap_at: Vec<usize> = opts
        .snapshot_times
        .iter()
        .map(|&t| if h == 0.0 { 0 } else { ((t - cfg.t_begin) / h).round().clamp(0.0, steps as f64) as usize })
        .collect();
    let stride = opts.monitor_stride.max(1);
    let mut series: Vec<MonitorSeries> = monitors.iter().map(|&m| MonitorSeries { monitor: m, times: vec![], values: vec![] }).collect();
    let mut snapshots = Vec::new();
    let mut v = v0.clone();
    for n in 0..=steps {
        let t = cfg.t_begin + n as f64 * h;
        if n % stride == 0 || n == steps {
            for s in series.iter_mut() {
                s.times.push(t);
                s.values.push(s.monitor.eval(&v));
            }
        }
        for _ in snap_at.iter().filter(|&&k| k == n) {
            snapshots.push((t, v.clone()));
        }
        if n == steps {
            break;
        }
        let next = ops.rk4(&v, h, cfg.exec);
        if blown_up(&next) {
            return Err(ZkError::Blowup { t: t + h, last_good: Box::new(v) });
        }
        v = SpectralField::new(v.grid().clone(), next)?;
    }
    Ok(Trajectory { snapshots, monitors: series, steps, dt: h, last: v })
}

/// `∫v`.
pub fn mass(v: &SpectralField) -> f64 {
    let g = v.grid();
    g.area() * v.at(0, 0).re
}

/// `½∫|∇v|² + c∫v³`.
pub fn energy(v: &RealField, cubic_coeff: f64) -> f64 {
    let s = forward_with(v, Execution::Sequential);
    gradient_energy(&s) + cubic_coeff * lp_cubed(v)
}

fn energy_spectral(v: &SpectralField, cubic: f64) -> f64 {
    gradient_energy(v) + cubic * lp_cubed(&inverse_with(v, Execution::Sequential))
}

fn lp_cubed(v: &RealField) -> f64 {
    v.grid().cell_area() * par::ordered_sum(v.samples().iter().map(|x| x * x * x))
}

fn gradient_energy(v: &SpectralField) -> f64 {
    let g = v.grid();
    let mut acc = 0.0;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if g.is_nyquist(i, j) {
                continue;
            }
            let (k1, k2) = (g.kx()[i], g.ky()[j]);
            acc += (k1 * k1 + k2 * k2) * v.at(i, j).norm_sqr();
        }
    }
    0.5 * g.area() * acc
}

/// Physical energy `½∫|∇u|² + c∫u³` of `u = v/a` written in symmetric
/// variables: `(2√3a²)^{-1} [2∫(v₁² + v₂² − v₁v₂) + 4c∫v³]`, `a = 2^{-2/3}`.
pub fn symmetric_energy(v: &SpectralField, cubic_coeff: f64) -> f64 {
    let g = v.grid();
    let mut acc = 0.0;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if g.is_nyquist(i, j) {
                continue;
            }
            let (k1, k2) = (g.kx()[i], g.ky()[j]);
            acc += (k1 * k1 + k2 * k2 - k1 * k2) * v.at(i, j).norm_sqr();
        }
    }
    let quad = 2.0 * g.area() * acc;
    let cubic = 4.0 * cubic_coeff * lp_cubed(&inverse_with(v, Execution::Sequential));
    (quad + cubic) / crate::symmetry::jacobian()
}

/// Drift of the energy for each candidate cubic coefficient along stored
/// states, returned in input order.
pub fn energy_scan(states: &[SpectralField], eq: Equation, candidates: &[f64]) -> Vec<(f64, f64)> {
    candidates
        .iter()
        .map(|&c| {
            let m = match eq {
                Equation::Physical => Monitor::Energy { cubic: c },
                Equation::Symmetric => Monitor::SymmetricEnergy { cubic: c },
            };
            let values: Vec<f64> = states.iter().map(|s| m.eval(s)).collect();
            let s = MonitorSeries { monitor: m, times: vec![0.0; values.len()], values };
            (c, s.relative_drift())
        })
        .collect()
}

/// `sup_t t^α (‖w(t)‖_{H²} + ‖w‖_{L³(t, t_last; W^{1,∞})})` over stored
/// times, the time integral by the trapezoid rule.
pub fn xt_norm(w_traj: &[(f64, SpectralField)], alpha: f64) -> Result<f64> {
    if w_traj.len() < 2 {
        return Err(ZkError::InsufficientData("xt_norm needs at least two snapshots".into()));
    }
    let mut traj: Vec<&(f64, SpectralField)> = w_traj.iter().collect();
    traj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let h2: Vec<f64> = traj.iter().map(|(_, w)| sobolev_norm(w, 2.0, Exponent::Two)).collect();
    let cube: Vec<f64> = traj.iter().map(|(_, w)| sobolev_norm(w, 1.0, Exponent::Inf).powi(3)).collect();
    let n = traj.len();
    let mut tail = vec![0.0; n];
    for k in (0..n - 1).rev() {
        tail[k] = tail[k + 1] + 0.5 * (traj[k + 1].0 - traj[k].0) * (cube[k] + cube[k + 1]);
    }
    Ok((0..n).fold(0.0f64, |m, k| m.max(traj[k].0.powf(alpha) * (h2[k] + tail[k].cbrt()))))
}

/// Final-state experiment setup.
#[derive(Clone, Debug)]
pub struct ScatterConfig {
    pub vinf: FinalData,
    /// Hard bound on `‖v∞‖_X`.
    pub epsilon_check: f64,
    pub t_far: f64,
    pub t_near: f64,
    pub picard_max: usize,
    /// Relative successive-difference tolerance.
    pub picard_tol: f64,
    pub alpha_target: f64,
    /// Weight exponent of the `X_T` norm.
    pub alpha_weight: f64,
    /// Ratio of consecutive panel endpoints before the phase cap applies.
    pub panel_ratio: f64,
    /// Largest phase increment of the fastest mode across one panel.
    pub panel_phase: f64,
    /// Run a forward IF-RK4 check from `v(t_near)` to `t_far` at this CFL.
    pub confirm_cfl: Option<f64>,
    pub exec: Execution,
}

impl ScatterConfig {
    pub fn new(vinf: FinalData, t_near: f64, t_far: f64) -> Self {
        Self {
            vinf,
            epsilon_check: 1e-2,
            t_far,
            t_near,
            picard_max: 20,
            picard_tol: 1e-10,
            alpha_target: 2.0 / 3.0,
            alpha_weight: 0.75,
            panel_ratio: 1.25,
            panel_phase: 2.0,
            confirm_cfl: Some(0.5),
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    /// Reporting times, decreasing from the last panel boundary below
    /// `t_far` down to `t_near`.
    pub times: Vec<f64>,
    pub h2_error: Vec<f64>,
    /// Decay exponent of `h2_error` over `[t_near, t_far/4]`; absent when
    /// the error vanishes identically.
    pub fitted_alpha: Option<f64>,
    pub fitted_alpha_ci: Option<f64>,
    pub xt_norm: f64,
    pub picard_diffs: Vec<f64>,
    pub picard_ratios: Vec<f64>,
    pub converged: bool,
    /// Relative (mass, energy) drifts of the confirmation solve.
    pub conservation_drift: Option<(f64, f64)>,
    /// `‖v_solve(t_far) − V(t_far)v∞‖_{H²} / ‖v∞‖_{H²}` from the confirmation solve.
    pub confirm_mismatch: Option<f64>,
    pub nodes: usize,
    pub panels: usize,
}

/// Panels on `[a, b]`: geometric growth by `ratio`, capped at `h_max`.
pub fn time_panels(a: f64, b: f64, ratio: f64, h_max: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut t = a;
    while t < b * (1.0 - 1e-14) {
        let h = (t * (ratio - 1.0)).min(h_max).max(1e-12 * b);
        let e = if t + h > b - 0.25 * h { b } else { t + h };
        out.push((t, e));
        t = e;
    }
    out
}

fn max_phase(g: &Grid) -> f64 {
    let mut m = 0.0f64;
    for i in 0..g.nx() {
        for j in 0..g.ny() {
            if g.keep(i, j) {
                m = m.max(crate::propagator::omega(g.kx()[i], g.ky()[j]).abs());
            }
        }
    }
    3.0 * m
}

fn h2(f: &SpectralField) -> f64 {
    sobolev_norm(f, 2.0, Exponent::Two)
}

/// Interaction-picture integrand `V(−τ)N(τ)`.
fn duhamel_integrand(tau: f64, w_int: &SpectralField, vinf: &SpectralField, v2: &RealField, flux: &Operators) -> SpectralField {
    let exec = Execution::Sequential;
    let w = inverse_with(&propagate(w_int, tau), exec);
    let v1 = inverse_with(&propagate(vinf, tau), exec);
    let (ws, v1s, v2s) = (w.samples(), v1.samples(), v2.samples());
    let src: Vec<f64> = (0..ws.len())
        .map(|m| {
            let (w, a, b) = (ws[m], v1s[m], v2s[m]);
            w * w + 2.0 * (a + b) * w + 2.0 * a * b + b * b
        })
        .collect();
    let mut s = forward_with(&RealField::new(w.grid().clone(), src).expect("finite source"), exec);
    flux.apply_flux(&mut s);
    propagate(&s, -tau)
}

/// Backward Picard construction of `v` from certified final data.
pub fn final_state_solve(cfg: &ScatterConfig) -> Result<ScatterReport> {
    let x = cfg.vinf.x_norm();
    // Relative slack absorbs rounding when data are scaled onto the gate.
    if !(x <= cfg.epsilon_check * (1.0 + 1e-12)) {
        return Err(ZkError::Gate { x_norm: x, epsilon: cfg.epsilon_check });
    }
    if !(cfg.t_near > 0.0 && cfg.t_near < cfg.t_far) {
        return Err(ZkError::InvalidTime(format!("need 0 < t_near < t_far, got {} and {}", cfg.t_near, cfg.t_far)));
    }
    if !(cfg.panel_ratio > 1.0 && cfg.panel_phase > 0.0 && cfg.picard_max >= 1) {
        return Err(ZkError::InvalidArgument("panel_ratio > 1, panel_phase > 0 and picard_max ≥ 1 required".into()));
    }
    let vinf = cfg.vinf.field();
    let grid = vinf.grid().clone();
    let exec = cfg.exec;
    let phi_max = max_phase(&grid);
    let h_max = if phi_max > 0.0 { cfg.panel_phase / phi_max } else { f64::INFINITY };
    let panels = time_panels(cfg.t_near, cfg.t_far, cfg.panel_ratio, h_max);
    let (gx, gw) = gauss_legendre(8);
    let tail = tail_integration_matrix(&gx);
    let nq = gx.len();
    let nodes: Vec<f64> = panels.iter().flat_map(|&(a, b)| gx.iter().map(move |s| 0.5 * (a + b) + 0.5 * (b - a) * s)).collect();
    log::info!("final-state solve: {} panels, {} nodes, phase bound {phi_max:.3e}", panels.len(), nodes.len());

    let v2cfg = |t: f64| V2Config::new(t, cfg.t_far);
    let v2_nodes: Vec<RealField> = par::try_map_range(nodes.len(), exec, |n| -> Result<RealField> {
        let v2 = build_v2_with(vinf, &v2cfg(nodes[n]), Execution::Sequential)?;
        Ok(inverse_with(&v2, Execution::Sequential))
    })?;
    let flux = Operators::new(&grid, Equation::Symmetric, 0.0, true);

    let mut w_int: Vec<SpectralField> = vec![SpectralField::zeros(grid.clone()); nodes.len()];
    let mut w_bound: Vec<SpectralField> = vec![SpectralField::zeros(grid.clone()); panels.len()];
    let (mut diffs, mut ratios) = (Vec::new(), Vec::new());
    let mut converged = false;
    for iter in 0..cfg.picard_max {
        let g: Vec<SpectralField> =
            par::map_range(nodes.len(), exec, |n| duhamel_integrand(nodes[n], &w_int[n], vinf, &v2_nodes[n], &flux));
        let mut next = w_int.clone();
        let mut next_bound = w_bound.clone();
        let mut acc = SpectralField::zeros(grid.clone());
        for (p, &(a, b)) in panels.iter().enumerate().rev() {
            let hh = 0.5 * (b - a);
            let base = p * nq;
            for q in 0..nq {
                let mut part = acc.clone();
                for l in 0..nq {
                    part = part.add(&g[base + l].scale(hh * tail[q][l]))?;
                }
                next[base + q] = part.scale(-1.0);
            }
            for l in 0..nq {
                acc = acc.add(&g[base + l].scale(hh * gw[l]))?;
            }
            next_bound[p] = acc.scale(-1.0);
        }
        let weight = |n: usize| nodes[n].powf(cfg.alpha_weight);
        let mut diff = 0.0f64;
        for n in 0..nodes.len() {
            diff = diff.max(weight(n) * h2(&next[n].sub(&w_int[n])?));
        }
        let size = (0..nodes.len()).fold(0.0f64, |m, n| m.max(weight(n) * h2(&next[n])));
        w_int = next;
        w_bound = next_bound;
        if let Some(&prev) = diffs.last() {
            let r: f64 = if prev > 0.0 { diff / prev } else { 0.0 };
            ratios.push(r);
        }
        diffs.push(diff);
        log::debug!("picard {iter}: diff {diff:.3e}, size {size:.3e}");
        let k = ratios.len();
        if k >= 2 && ratios[k - 1] >= 1.0 && ratios[k - 2] >= 1.0 {
            return Err(ZkError::PicardDivergence { ratios });
        }
        if diff <= cfg.picard_tol * size || diff == 0.0 {
            converged = true;
            break;
        }
    }

    // Reporting on panel left endpoints, from the far end inward.
    let times: Vec<f64> = panels.iter().rev().map(|&(a, _)| a).collect();
    let v2_bound: Vec<SpectralField> = par::try_map_range(panels.len(), exec, |p| -> Result<SpectralField> {
        build_v2_with(vinf, &v2cfg(panels[p].0), Execution::Sequential)
    })?;
    let w_phys: Vec<SpectralField> = (0..panels.len()).map(|p| propagate(&w_bound[p], panels[p].0)).collect();
    let mut h2_error = Vec::with_capacity(panels.len());
    for p in (0..panels.len()).rev() {
        h2_error.push(h2(&v2_bound[p].add(&w_phys[p])?));
    }
    for (k, e) in h2_error.iter().enumerate() {
        if !e.is_finite() {
            return Err(ZkError::NonFinite(k));
        }
    }

    let (mut ft, mut fv): (Vec<f64>, Vec<f64>) =
        times.iter().zip(&h2_error).filter(|(t, _)| **t <= 0.25 * cfg.t_far * (1.0 + 1e-12)).map(|(t, e)| (*t, *e)).unzip();
    ft.reverse();
    fv.reverse();
    let (fitted_alpha, fitted_alpha_ci) = if fv.iter().all(|&e| e > 0.0) && fv.len() >= 3 {
        let fit = loglog_fit(&ft, &fv)?;
        (Some(-fit.slope), Some(fit.slope_ci))
    } else {
        (None, None)
    };

    let mut traj: Vec<(f64, SpectralField)> = (0..panels.len()).map(|p| (panels[p].0, w_phys[p].clone())).collect();
    traj.push((cfg.t_far, SpectralField::zeros(grid.clone())));
    let xt = xt_norm(&traj, cfg.alpha_weight)?;

    let (mut conservation_drift, mut confirm_mismatch) = (None, None);
    if let Some(cfl) = cfg.confirm_cfl {
        let v_near = propagate(vinf, cfg.t_near).add(&v2_bound[0])?.add(&w_phys[0])?;
        // Small data make the CFL step huge; the phase cap keeps RK4 resolved.
        let dt = cfl_time_step(&v_near, cfl).min(h_max).min(cfg.t_far - cfg.t_near);
        if dt.is_finite() && dt > 0.0 {
            let scfg = SolverConfig::new(dt, cfg.t_near, cfg.t_far).with_exec(exec);
            let mons = [Monitor::Mass, Monitor::SymmetricEnergy { cubic: 1.0 / 3.0 }];
            let opts = SolveOptions { monitor_stride: 1, snapshot_times: vec![] };
            let traj = solve(&v_near, &scfg, &mons, &opts)?;
            let l1 = lp_norm(&inverse_with(&v_near, exec), Exponent::One);
            conservation_drift = Some((traj.monitors[0].drift_relative_to(l1), traj.monitors[1].relative_drift()));
            let target = propagate(vinf, cfg.t_far);
            let scale = h2(vinf);
            if scale > 0.0 {
                confirm_mismatch = Some(h2(&traj.last.sub(&target)?) / scale);
            }
        }
    }

    Ok(ScatterReport {
        times,
        h2_error,
        fitted_alpha,
        fitted_alpha_ci,
        xt_norm: xt,
        picard_diffs: diffs,
        picard_ratios: ratios,
        converged,
        conservation_drift,
        confirm_mismatch,
        nodes: nodes.len(),
        panels: panels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian;
    use crate::grid::{forward, make_grid};
    use std::f64::consts::PI;

    #[test]
    fn nonlinearity_hand_values() {
        let g = make_grid(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        assert_eq!(rhs_nonlinear(&RealField::zeros(g.clone())).max_abs(), 0.0);
        assert!(rhs_nonlinear(&RealField::from_fn(g.clone(), |_, _| 3.0)).max_abs() < 1e-13);
        let r = rhs_nonlinear(&RealField::from_fn(g.clone(), |x, _| x.cos()));
        let e = RealField::from_fn(g, |x, _| -(2.0 * x).sin());
        assert!(r.zip_with(&e, |a, b| a - b).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn energy_of_harmonic() {
        let g = make_grid(32, 32, 2.0 * PI, 2.0 * PI).unwrap();
        let v = RealField::from_fn(g.clone(), |x, _| x.cos());
        assert!((energy(&v, 0.7) - 0.5 * g.area() / 2.0).abs() < 1e-12);
        assert_eq!(energy(&RealField::zeros(g), 1.0), 0.0);
    }

    #[test]
    fn zero_step_is_identity() {
        let g = make_grid(16, 16, 20.0, 20.0).unwrap();
        let v = forward(&gaussian(g, 0.1, 2.0, (0.0, 0.0)));
        assert_eq!(step(&v, 0.0, &SolverConfig::new(0.1, 0.0, 1.0)).unwrap().coeffs(), v.coeffs());
    }

    #[test]
    fn panels_cover_interval() {
        let p = time_panels(1.0, 50.0, 1.25, 2.0);
        assert_eq!(p[0].0, 1.0);
        assert_eq!(p.last().unwrap().1, 50.0);
        assert!(p.windows(2).all(|w| w[0].1 == w[1].0));
        assert!(p.iter().all(|(a, b)| b - a <= 2.0 * 1.25 + 1e-12));
    }

    #[test]
    fn xt_norm_zero_and_linear() {
        let g = make_grid(8, 8, 10.0, 10.0).unwrap();
        let z: Vec<(f64, SpectralField)> = (1..4).map(|t| (t as f64, SpectralField::zeros(g.clone()))).collect();
        assert_eq!(xt_norm(&z, 0.75).unwrap(), 0.0);
        let f = forward(&gaussian(g, 1.0, 1.5, (0.0, 0.0)));
        let one: Vec<(f64, SpectralField)> = (1..4).map(|t| (t as f64, f.clone())).collect();
        let two: Vec<(f64, SpectralField)> = one.iter().map(|(t, w)| (*t, w.scale(2.0))).collect();
        let (a, b) = (xt_norm(&one, 0.75).unwrap(), xt_norm(&two, 0.75).unwrap());
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
        assert!(xt_norm(&one[..1], 0.75).is_err());
    }
}
