//! One function per subcommand. Each returns an [`Outcome`] whose summary
//! carries only derived numbers, never timings, so that repeated runs
//! serialize identically.

use std::f64::consts::PI;
use std::sync::Arc;

use serde_json::json;
use zkscatter::bilinear::{self, BilinearOp, SplitI, V2Config};
use zkscatter::data::{self, BandSpec};
use zkscatter::dynamics::{self, Equation, Monitor, ScatterConfig, ScatterReport, SolveOptions, SolverConfig};
use zkscatter::fit::{log_space, loglog_fit};
use zkscatter::grid::{dealias, forward, inverse, product};
use zkscatter::norms::{self, certify, Exponent, FinalData};
use zkscatter::propagator::{self, DecayFit, DecayOptions, NormKind};
use zkscatter::resonance::{self, BilinearSymbol};
use zkscatter::{quad, symmetry, FourierMultiplier, Grid, RealField, SpectralField};

use crate::config::{self, ExperimentConfig, GridSpec};
use crate::output::{csv_columns, Check, Outcome, Summary};
use crate::CliError;

type Res = Result<Outcome, CliError>;

fn outcome(name: &str, cfg: &ExperimentConfig, checks: Vec<Check>, details: serde_json::Value) -> Outcome {
    Outcome { summary: Summary::new(name, cfg.seed, checks, details), csv: vec![], fields: vec![] }
}

fn grid(cfg: &ExperimentConfig, section: Option<GridSpec>, fallback: GridSpec) -> Result<Arc<Grid>, CliError> {
    cfg.grid_for(section, fallback).build()
}

/// Band-pass data certified on its annulus and scaled to `‖·‖_X = x`.
pub fn final_data(g: Arc<Grid>, band: BandSpec, x: f64) -> Result<FinalData, CliError> {
    let (lo, hi, gap) = band.annulus();
    let f = certify(&data::band_pass(g, band), lo, hi, gap)?;
    let raw = f.x_norm();
    if !(raw > 0.0) {
        return Err(CliError::Config("band leaves no retained modes on this grid".into()));
    }
    Ok(f.scaled(x / raw))
}

fn fit_csv(fit: &DecayFit) -> String {
    fit.to_csv()
}

pub fn identity(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.identity;
    let rep = resonance::identity_sweep(c.samples, cfg.seed, c.eta_min);
    let den = resonance::denominator_lower_bound_check(c.denominator_samples, cfg.seed);

    // T_m with m ≡ 1 against the dealiased pointwise product.
    let g = zkscatter::make_grid(8, 8, 2.0 * PI, 2.0 * PI)?;
    let op = BilinearOp { symbol: BilinearSymbol::One, grid: g.clone() };
    let mut worst = 0.0f64;
    let mut per_seed = Vec::with_capacity(c.product_seeds);
    for s in 0..c.product_seeds as u64 {
        let f = dealias(&forward(&data::random_field(g.clone(), cfg.seed, 2 * s)));
        let h = dealias(&forward(&data::random_field(g.clone(), cfg.seed, 2 * s + 1)));
        let direct = forward(&product(&inverse(&f), &inverse(&h))?);
        let tm = bilinear::apply_tm(&op, &f, &h)?;
        let err = tm.sub(&direct)?.max_abs() / direct.max_abs().max(f64::MIN_POSITIVE);
        per_seed.push(err);
        worst = worst.max(err);
    }

    let checks = vec![
        Check::at_most("key_identity", rep.max_key_residual, c.key_tol),
        Check::at_most("euler_identity", rep.max_euler_residual, c.euler_tol),
        Check::at_most("cubic_decomposition", rep.max_cubic_split_residual, c.euler_tol),
        Check::at_least("denominator_ratio", den.min_ratio, 1.0 - c.denominator_tol),
        Check::at_most("unit_symbol_product", worst, c.product_tol),
    ];
    let mut out = outcome("identity", cfg, checks, json!({ "identity": rep, "denominator": den }));
    let idx: Vec<f64> = (0..per_seed.len()).map(|s| s as f64).collect();
    out.csv.push(("product_oracle".into(), csv_columns(&["stream", "relative_error"], &[&idx, &per_seed])));
    Ok(out)
}

pub fn hm(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.hm;
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut csv = Vec::new();
    for name in &c.symbols {
        let s = BilinearSymbol::parse(name)?;
        let r = resonance::hm_condition_check_with(s, c.max_order, c.samples, cfg.seed, c.radii, zkscatter::Execution::default())?;
        let worst = r.variation.iter().cloned().fold(0.0f64, f64::max);
        checks.push(Check::below(&format!("variation[{name}]"), worst, c.max_variation));
        let mut cols: Vec<&[f64]> = vec![&r.radii];
        cols.extend(r.c_beta.iter().map(|v| v.as_slice()));
        let labels: Vec<String> = r.multi_indices.iter().map(|b| format!("c_{}{}{}{}", b[0], b[1], b[2], b[3])).collect();
        let mut header = vec!["radius"];
        header.extend(labels.iter().map(String::as_str));
        csv.push((format!("hm_{name}"), csv_columns(&header, &cols)));
        reports.push(r);
    }
    let mut out = outcome("hm", cfg, checks, json!({ "reports": reports }));
    out.csv = csv;
    Ok(out)
}

pub fn decay(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.decay;
    let g = grid(cfg, c.grid, config::DecayConfig::default_grid())?;
    let opts = |wrap| DecayOptions { norm: NormKind::Linf, oversample: c.oversample, wrap_fraction: wrap };
    let exec = zkscatter::Execution::default();

    let f = data::flat_top(g.clone(), c.window.0, c.window.1);
    let t1 = propagator::wrap_safe_time(&f, c.wrap_fraction);
    if !(t1 > c.t_min) {
        return Err(CliError::Config(format!("wrap-safe time {t1:.3} does not exceed t_min {}", c.t_min)));
    }
    let plain = propagator::decay_fit_spectral(&f, None, (c.t_min, t1), c.samples, opts(c.wrap_fraction), exec)?;
    let half = FourierMultiplier::abs_power(0.5, 0.5);
    let weighted = propagator::decay_fit_spectral(&f, Some(&half), (c.t_min, t1), c.samples, opts(c.wrap_fraction), exec)?;

    let b = data::band_pass(g, c.band);
    let tb = propagator::wrap_safe_time(&b, c.band_wrap_fraction);
    if !(tb > c.t_min) {
        return Err(CliError::Config(format!("wrap-safe time {tb:.3} does not exceed t_min {}", c.t_min)));
    }
    let w3 = FourierMultiplier::bessel(3.0);
    let v1 = propagator::decay_fit_spectral(&b, Some(&w3), (c.t_min, tb), c.samples, opts(c.band_wrap_fraction), exec)?;

    let checks = vec![
        Check::within("linf_exponent", plain.slope, c.linf_target, c.linf_tol),
        Check::within("half_derivative_exponent", weighted.slope, c.weighted_target, c.weighted_tol),
        Check::within("w3inf_exponent", v1.slope, c.w3_target, c.w3_tol),
    ];
    let details = json!({ "linf": plain, "half_derivative": weighted, "w3inf": v1 });
    let mut out = outcome("decay", cfg, checks, details);
    out.csv = vec![("linf".into(), fit_csv(&plain)), ("half_derivative".into(), fit_csv(&weighted)), ("w3inf".into(), fit_csv(&v1))];
    Ok(out)
}

/// `(2π)^{-1/2} ∫ e^{i(zξ+ξ³)} dξ` along the rays `ξ = ±r e^{±iπ/6}`, where
/// `e^{iξ³} = e^{-r³}`. The two rays are complex conjugates for real `z`.
pub fn airy_oracle(z: f64) -> f64 {
    let rot = num_complex::Complex64::from_polar(1.0, PI / 6.0);
    let integrand = |r: f64| {
        let e = num_complex::Complex64::new(0.0, z * r) * rot - r * r * r;
        (e.exp() * rot).re
    };
    2.0 * quad::integrate(integrand, 0.0, 7.0, 28, 20) / (2.0 * PI).sqrt()
}

pub fn airy(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.airy;
    let kernel = propagator::airy_kernel(c.t, 0.0)?;
    let oracle = c.t.powf(-1.0 / 3.0) * airy_oracle(0.0);
    let kernel_err = (kernel - oracle).abs();

    // Direct convolution with the product kernel on a probe block at the
    // center, against spectral propagation of the same samples.
    let g = grid(cfg, c.grid, config::AiryConfig::default_grid())?;
    let u = data::gaussian(g.clone(), 1.0, c.sigma, (0.0, 0.0));
    let spectral = inverse(&propagator::propagate(&forward(&u), c.t));
    let (nx, ny) = (g.nx(), g.ny());
    let table = |n: usize, d: f64| -> Result<Vec<f64>, CliError> {
        (0..2 * n - 1).map(|k| Ok(propagator::airy_kernel(c.t, (k as f64 - (n - 1) as f64) * d)?)).collect()
    };
    let (ax, ay) = (table(nx, g.dx())?, table(ny, g.dy())?);
    let norm = g.cell_area() / (2.0 * PI);
    let (i0, j0) = (nx / 2 - c.probe / 2, ny / 2 - c.probe / 2);
    let probes: Vec<(usize, usize)> = (0..c.probe).flat_map(|a| (0..c.probe).map(move |b| (i0 + a, j0 + b))).collect();
    let direct = zkscatter::par::map_range(probes.len(), zkscatter::Execution::default(), |p| {
        let (pi, pj) = probes[p];
        let mut acc = 0.0;
        for i in 0..nx {
            let kx = ax[pi + nx - 1 - i];
            let mut row = 0.0;
            for j in 0..ny {
                row += ay[pj + ny - 1 - j] * u.at(i, j);
            }
            acc += kx * row;
        }
        acc * norm
    });
    let mut prop_err = 0.0f64;
    let mut scale = 0.0f64;
    for (&(pi, pj), d) in probes.iter().zip(&direct) {
        prop_err = prop_err.max((d - spectral.at(pi, pj)).abs());
        scale = scale.max(spectral.at(pi, pj).abs());
    }
    let rel = prop_err / scale;

    let checks = vec![
        Check::at_most("kernel_vs_oracle", kernel_err, c.kernel_tol),
        Check::at_most("convolution_vs_spectral", rel, c.propagation_tol),
    ];
    let details = json!({ "kernel": kernel, "oracle": oracle, "probe_points": probes.len(), "probe_max": scale });
    let mut out = outcome("airy", cfg, checks, details);
    let xs: Vec<f64> = (0..2 * nx - 1).map(|k| (k as f64 - (nx - 1) as f64) * g.dx()).collect();
    out.csv.push(("kernel".into(), csv_columns(&["y", "kernel"], &[&xs, &ax])));
    Ok(out)
}

pub fn v2(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.v2;
    let g = grid(cfg, c.grid, config::bilinear_default_grid())?;
    let vinf = final_data(g, c.data.band, c.data.x_norm)?;
    let times = log_space(c.t_min, c.t_max, c.samples);
    let rep = bilinear::lemma_xf_check(&vinf, &times, c.horizon)?;
    let checks =
        vec![Check::at_most("h3_exponent", rep.h3.slope, c.slope_max), Check::below("ratio_spread", rep.ratio_spread, c.spread_max)];
    let mut out = outcome("v2", cfg, checks, json!({ "x_norm": vinf.x_norm(), "report": rep }));
    out.csv.push(("v2".into(), csv_columns(&["t", "h3", "l2", "ratio"], &[&rep.h3.times, &rep.h3.values, &rep.l2.values, &rep.ratios])));
    out.fields.push(("vinf".into(), vinf.field().clone()));
    Ok(out)
}

pub fn split(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.split;
    let g = grid(cfg, c.grid, config::bilinear_default_grid())?;
    let vinf = final_data(g, c.data.band, c.data.x_norm)?;
    let f = vinf.field();
    let mut checks = Vec::new();
    let mut errs = Vec::new();
    for &t in &c.times {
        let v2c = V2Config::new(t, c.horizon);
        let direct = bilinear::i_from_v2(&bilinear::build_v2(f, &v2c)?, t);
        let s: SplitI = bilinear::split_i(f, &v2c)?;
        let err = s.recomposed()?.sub(&direct)?.l2_norm() / direct.l2_norm();
        checks.push(Check::at_most(&format!("recomposition[t={t}]"), err, c.recomposition_tol));
        errs.push(err);
    }
    let times = log_space(c.fit_range.0, c.fit_range.1, c.fit_samples);
    let mut tr = Vec::with_capacity(times.len());
    let mut sr = Vec::with_capacity(times.len());
    for &t in &times {
        let s = bilinear::split_i(f, &V2Config::new(t, c.horizon))?;
        tr.push(s.i_tr.l2_norm());
        sr.push(s.i_sr.l2_norm());
    }
    let fit = DecayFit::from_samples(times.clone(), tr.clone())?;
    checks.push(Check::at_most("i_tr_exponent", fit.slope, c.slope_max));
    let details = json!({ "times": c.times, "recomposition": errs, "i_tr_fit": fit });
    let mut out = outcome("split", cfg, checks, details);
    out.csv.push(("split".into(), csv_columns(&["t", "i_tr_l2", "i_sr_l2"], &[&times, &tr, &sr])));
    Ok(out)
}

pub fn conserve(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.conserve;
    let g = grid(cfg, c.grid, config::ConserveConfig::default_grid())?;
    let v0 = dealias(&forward(&data::gaussian(g, c.amplitude, c.sigma, (0.0, 0.0))));
    let dt = dynamics::cfl_time_step(&v0, c.cfl);
    let solver = SolverConfig::new(dt, 0.0, dt * c.steps as f64).with_equation(c.equation);
    let energy = |cubic| match c.equation {
        Equation::Physical => Monitor::Energy { cubic },
        Equation::Symmetric => Monitor::SymmetricEnergy { cubic },
    };
    let mut monitors = vec![Monitor::Mass];
    monitors.extend(c.candidates.iter().map(|&k| energy(k)));
    let opts = SolveOptions { monitor_stride: c.monitor_stride, snapshot_times: vec![] };
    let tr = dynamics::solve(&v0, &solver, &monitors, &opts)?;

    // Mass is normalized by ∫|v|, since ∫v itself may vanish.
    let l1 = norms::lp_norm(&inverse(&v0), Exponent::One);
    let mass_drift = tr.monitors[0].drift_relative_to(l1);
    let drifts: Vec<(f64, f64)> = c.candidates.iter().zip(&tr.monitors[1..]).map(|(&k, s)| (k, s.relative_drift())).collect();
    let best = drifts.iter().cloned().fold((f64::NAN, f64::INFINITY), |b, d| if d.1 < b.1 { d } else { b });
    let reference = -1.0 / 6.0;
    let reference_drift = drifts.iter().find(|d| d.0 == reference).map(|d| d.1);

    let checks = vec![Check::at_most("mass_drift", mass_drift, c.mass_tol), Check::at_most("best_energy_drift", best.1, c.energy_tol)];
    let details = json!({
        "equation": c.equation,
        "dt": tr.dt,
        "steps": tr.steps,
        "best_cubic": best.0,
        "candidates": drifts,
        "reference_cubic": reference,
        "reference_drift": reference_drift,
    });
    let mut out = outcome("conserve", cfg, checks, details);
    let mut header = vec!["t".to_string()];
    header.extend(tr.monitors.iter().map(|m| m.monitor.name()));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut cols: Vec<&[f64]> = vec![&tr.monitors[0].times];
    cols.extend(tr.monitors.iter().map(|m| m.values.as_slice()));
    out.csv.push(("monitors".into(), csv_columns(&h, &cols)));
    out.fields.push(("final".into(), tr.last.clone()));
    Ok(out)
}

fn scatter_run(vinf: &FinalData, s: &config::ScatterSection, t_far: f64, phase: f64) -> Result<ScatterReport, CliError> {
    let mut sc = ScatterConfig::new(vinf.clone(), s.t_near, t_far);
    sc.epsilon_check = s.epsilon;
    sc.picard_max = s.picard_max;
    sc.picard_tol = s.picard_tol;
    sc.panel_phase = phase;
    sc.alpha_target = s.alpha_target;
    Ok(dynamics::final_state_solve(&sc)?)
}

pub fn scatter(cfg: &ExperimentConfig) -> Res {
    let s = &cfg.scatter;
    let g = grid(cfg, s.grid, config::ScatterSection::default_grid())?;
    let vinf = final_data(g, s.band, s.x_norm)?;
    let base = scatter_run(&vinf, s, s.t_far, s.panel_phase)?;
    let max_ratio = base.picard_ratios.iter().cloned().fold(0.0f64, f64::max);
    let alpha = base.fitted_alpha.unwrap_or(f64::INFINITY);
    let mut checks = vec![
        Check::at_most("picard_ratio", max_ratio, s.ratio_max),
        Check::at_least("fitted_alpha", alpha, s.alpha_target - s.alpha_slack),
    ];
    let mut variants = Vec::new();
    if s.stability {
        for (label, t_far, phase) in [("t_far_doubled", 2.0 * s.t_far, s.panel_phase), ("dt_halved", s.t_far, 0.5 * s.panel_phase)] {
            let r = scatter_run(&vinf, s, t_far, phase)?;
            let a = r.fitted_alpha.unwrap_or(f64::INFINITY);
            let ci = base.fitted_alpha_ci.unwrap_or(0.0).max(r.fitted_alpha_ci.unwrap_or(0.0));
            let shift = (a - alpha).abs();
            checks.push(Check { name: format!("stability[{label}]"), value: shift, rule: format!("<= fit CI {ci:e}"), pass: shift <= ci });
            variants.push(json!({ "label": label, "t_far": t_far, "panel_phase": phase, "report": r }));
        }
    }
    let details = json!({ "x_norm": vinf.x_norm(), "z_norm": vinf.z_norm(), "base": base, "variants": variants });
    let mut out = outcome("scatter", cfg, checks, details);
    out.csv.push(("h2_error".into(), csv_columns(&["t", "h2_error"], &[&base.times, &base.h2_error])));
    let it: Vec<f64> = (1..=base.picard_diffs.len()).map(|k| k as f64).collect();
    out.csv.push(("picard".into(), csv_columns(&["iterate", "difference"], &[&it, &base.picard_diffs])));
    out.fields.push(("vinf".into(), vinf.field().clone()));
    Ok(out)
}

pub fn transform(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.transform;

    let rg = c.roundtrip_grid.build()?;
    let u = data::gaussian(rg, 1.0, c.roundtrip_sigma, (0.0, 0.0));
    let v = symmetry::to_symmetric(&u)?;
    let back = symmetry::from_symmetric(&v)?;
    let u_l2 = norms::lp_norm(&u, Exponent::Two);
    let roundtrip = norms::lp_norm(&back.zip_with(&u, |a, b| a - b)?, Exponent::Two) / u_l2;
    let l2_ratio = norms::lp_norm(&v, Exponent::Two) / u_l2;
    let l2_expected = symmetry::scale() * symmetry::jacobian().sqrt();

    let mut symbol = 0.0f64;
    for p in resonance::sample_pairs(c.symbol_samples, cfg.seed, 0.1) {
        for k in [p.xi, p.eta] {
            let ks = symmetry::dual_map(k);
            let w = propagator::omega(ks[0], ks[1]);
            let k3 = k[0].hypot(k[1]).powi(3);
            symbol = symbol.max((w - symmetry::physical_symbol(k)).abs() / (1.0 + k3));
        }
    }

    let gp = grid(cfg, c.grid, config::TransformConfig::default_grid())?;
    let scale = |n: usize| ((n as f64 * c.target_factor).round() as usize).max(2) & !1;
    let gs = zkscatter::make_grid(scale(gp.nx()), scale(gp.ny()), gp.lx(), gp.ly())?;
    let u0 = dealias(&forward(&data::gaussian(gp, c.amplitude, c.sigma, (0.0, 0.0))));
    let mut residuals = Vec::with_capacity(c.steps.len());
    for &h in &c.steps {
        let solver = SolverConfig::new(c.dt, 0.0, c.t_center + h).with_equation(Equation::Physical);
        let opts = SolveOptions { monitor_stride: usize::MAX, snapshot_times: vec![c.t_center - h, c.t_center, c.t_center + h] };
        let tr = dynamics::solve(&u0, &solver, &[], &opts)?;
        let traj: Vec<(f64, RealField)> = tr.snapshots.iter().map(|(t, s)| (*t, inverse(s))).collect();
        residuals.push(symmetry::transform_residual(&traj, gs.clone())?);
    }
    let order = loglog_fit(&c.steps, &residuals)?;

    let checks = vec![
        Check::at_most("roundtrip", roundtrip, c.roundtrip_tol),
        Check::at_most("symbol_map", symbol, c.symbol_tol),
        Check::within("residual_order", order.slope, c.order_target, c.order_tol),
    ];
    let details = json!({
        "l2_ratio": l2_ratio,
        "l2_ratio_expected": l2_expected,
        "steps": c.steps,
        "residuals": residuals,
        "order": order,
        "symmetric_grid": [gs.nx(), gs.ny()],
    });
    let mut out = outcome("transform", cfg, checks, details);
    out.csv.push(("residual".into(), csv_columns(&["h", "residual"], &[&c.steps, &residuals])));
    out.fields.push(("roundtrip_symmetric".into(), forward(&v)));
    Ok(out)
}

pub fn norms(cfg: &ExperimentConfig) -> Res {
    let c = &cfg.norms;
    let g = grid(cfg, c.grid, config::NormsConfig::default_grid())?;
    let f = final_data(g.clone(), c.data.band, c.data.x_norm)?;
    let homog = |a: f64| {
        let s = f.scaled(a);
        ((s.x_norm() - a.abs() * f.x_norm()).abs() / (a.abs() * f.x_norm()))
            .max((s.z_norm() - a.abs() * f.z_norm()).abs() / (a.abs() * f.z_norm()))
    };
    let homogeneity = [2.0, -0.5, 10.0].into_iter().map(homog).fold(0.0f64, f64::max);
    let zero = norms::x_report(&SpectralField::zeros(g))?.total;
    let checks = vec![Check::at_most("homogeneity", homogeneity, 1e-12), Check::at_most("zero_field", zero, 0.0)];
    let details = json!({
        "x": f.x_report(),
        "z": f.z_report(),
        "z_over_x": f.z_norm() / f.x_norm(),
        "localized": f.x_report().localized(),
    });
    let mut out = outcome("norms", cfg, checks, details);
    let mut s = String::from("norm,component,value\n");
    for (label, rep) in [("x", f.x_report()), ("z", f.z_report())] {
        for comp in &rep.components {
            s.push_str(&format!("{label},\"{}\",{:.17e}\n", comp.name, comp.value));
        }
    }
    out.csv.push(("components".into(), s));
    out.fields.push(("vinf".into(), f.field().clone()));
    Ok(out)
}
