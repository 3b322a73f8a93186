//! Acceptance criteria. Every criterion prints a single `PASS`/`FAIL` line
//! to stderr with the measured value and the pinned bound; the process
//! fails if any criterion does. Runs without the libtest harness so that
//! the lines are never captured.

use std::collections::HashMap;
use std::io::Write;
use std::process::Command;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde_json::Value;
use zkscatter::resonance;
use zkscatter_cli::{execute, ExperimentConfig, Outcome, Subcommand};

type Cached = (Outcome, Duration);

/// Each subcommand is computed once and shared between criteria.
fn outcome(sub: Subcommand) -> Cached {
    static CACHE: OnceLock<Mutex<HashMap<&'static str, Cached>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(hit) = map.get(sub.name()) {
        return hit.clone();
    }
    let start = Instant::now();
    let out = execute(sub, &ExperimentConfig::default()).unwrap_or_else(|e| panic!("{}: {e}", sub.name()));
    let entry = (out, start.elapsed());
    map.insert(sub.name(), entry.clone());
    entry
}

fn value(out: &Outcome, check: &str) -> f64 {
    out.summary.check(check).unwrap_or_else(|| panic!("missing check {check}")).value
}

static FAILED: Mutex<Vec<u32>> = Mutex::new(Vec::new());

fn report(n: u32, title: &str, pass: bool, detail: String) {
    let line = format!("criterion {n:>2} {} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    if !pass {
        FAILED.lock().unwrap_or_else(|e| e.into_inner()).push(n);
    }
}

fn c01_key_identity() {
    const TOL: f64 = 1e-10;
    let start = Instant::now();
    let rep = resonance::identity_sweep(10_000, ExperimentConfig::default().seed, 0.1);
    let secs = start.elapsed().as_secs_f64();
    let r = rep.max_key_residual;
    report(1, "key identity", r <= TOL && secs < 1.0, format!("max residual {r:.3e} <= {TOL:e}, {secs:.3} s < 1 s"));
}

fn c02_euler_and_decomposition() {
    const TOL: f64 = 1e-12;
    let (out, _) = outcome(Subcommand::Identity);
    let (e, k) = (value(&out, "euler_identity"), value(&out, "cubic_decomposition"));
    report(2, "euler and decomposition identities", e <= TOL && k <= TOL, format!("euler {e:.3e}, decomposition {k:.3e}, bound {TOL:e}"));
}

fn c03_denominator_bound() {
    const BOUND: f64 = 1.0 - 1e-12;
    let (out, _) = outcome(Subcommand::Identity);
    let n = out.summary.details["denominator"]["n"].as_u64().unwrap_or(0);
    let r = value(&out, "denominator_ratio");
    report(3, "denominator lower bound", r >= BOUND && n >= 1_000_000, format!("min ratio {r:.15} over {n} points, bound {BOUND}"));
}

fn c04_hormander_mihlin() {
    const MAX: f64 = 10.0;
    let (out, _) = outcome(Subcommand::Hm);
    let names = ["m_tr_2", "m_sr_1_1", "dsigma1_m_sr_1_1"];
    let vals: Vec<f64> = names.iter().map(|s| value(&out, &format!("variation[{s}]"))).collect();
    let pass = vals.iter().all(|v| *v < MAX);
    let detail = names.iter().zip(&vals).map(|(n, v)| format!("{n} {v:.3e}")).collect::<Vec<_>>().join(", ");
    report(4, "Hormander-Mihlin variation", pass, format!("{detail}; bound < {MAX}"));
}

fn c05_dispersive_decay() {
    let (out, dt) = outcome(Subcommand::Decay);
    let (a, b) = (value(&out, "linf_exponent"), value(&out, "half_derivative_exponent"));
    let pass = (a + 2.0 / 3.0).abs() <= 0.05 && (b + 1.0).abs() <= 0.07 && dt.as_secs_f64() < 120.0;
    report(
        5,
        "dispersive decay",
        pass,
        format!("L^inf {a:.4} (-2/3 +/- 0.05), half derivatives {b:.4} (-1 +/- 0.07), {:.1} s < 120 s", dt.as_secs_f64()),
    );
}

fn c06_airy_cross_check() {
    let (out, _) = outcome(Subcommand::Airy);
    let (k, p) = (value(&out, "kernel_vs_oracle"), value(&out, "convolution_vs_spectral"));
    report(6, "Airy cross-check", k <= 1e-8 && p <= 1e-6, format!("kernel {k:.3e} <= 1e-8, 16x16 probe {p:.3e} <= 1e-6"));
}

fn c07_unit_symbol_product() {
    let (out, _) = outcome(Subcommand::Identity);
    let e = value(&out, "unit_symbol_product");
    report(7, "bilinear oracle m = 1", e <= 1e-12, format!("max relative error {e:.3e} over 100 seeds <= 1e-12"));
}

fn c08_v2_decay() {
    let (out, dt) = outcome(Subcommand::V2);
    let (s, r) = (value(&out, "h3_exponent"), value(&out, "ratio_spread"));
    let pass = s <= -0.9 && r < 10.0 && dt.as_secs_f64() < 600.0;
    report(8, "v2 decay", pass, format!("H^3 exponent {s:.4} <= -0.9, ratio spread {r:.3} < 10, {:.1} s", dt.as_secs_f64()));
}

fn c09_v1_decay() {
    let (out, _) = outcome(Subcommand::Decay);
    let s = value(&out, "w3inf_exponent");
    report(9, "v1 decay", (s + 1.0).abs() <= 0.07, format!("W^(3,inf) exponent {s:.4} (-1 +/- 0.07)"));
}

fn c10_split_recomposition() {
    let (out, _) = outcome(Subcommand::Split);
    let (a, b) = (value(&out, "recomposition[t=5]"), value(&out, "recomposition[t=20]"));
    let s = value(&out, "i_tr_exponent");
    let pass = a <= 1e-6 && b <= 1e-6 && s <= -0.9;
    report(10, "split recomposition", pass, format!("t=5 {a:.3e}, t=20 {b:.3e} (<= 1e-6), I_tr exponent {s:.4} <= -0.9"));
}

fn c11_conservation() {
    let (out, _) = outcome(Subcommand::Conserve);
    let (m, e) = (value(&out, "mass_drift"), value(&out, "best_energy_drift"));
    let d = &out.summary.details;
    let best = d["best_cubic"].as_f64().unwrap_or(f64::NAN);
    let reference = d["reference_drift"].as_f64().unwrap_or(f64::NAN);
    let pass = m <= 1e-10 && e <= 1e-8;
    report(
        11,
        "conservation",
        pass,
        format!("mass {m:.3e} <= 1e-10, energy {e:.3e} <= 1e-8 at best cubic {best:.4}; cubic -1/6 drifts {reference:.3e}"),
    );
}

fn c12_scattering() {
    let (out, dt) = outcome(Subcommand::Scatter);
    let ratio = value(&out, "picard_ratio");
    let alpha = value(&out, "fitted_alpha");
    let t_far = value(&out, "stability[t_far_doubled]");
    let dt_half = value(&out, "stability[dt_halved]");
    let stable = out.summary.check("stability[t_far_doubled]").is_some_and(|c| c.pass)
        && out.summary.check("stability[dt_halved]").is_some_and(|c| c.pass);
    let pass = ratio <= 0.5 && alpha >= 2.0 / 3.0 - 0.1 && stable && dt.as_secs_f64() < 3600.0;
    report(
        12,
        "scattering",
        pass,
        format!(
            "Picard ratio {ratio:.3e} <= 0.5, alpha {alpha:.4} >= {:.4}, shifts {t_far:.3e} / {dt_half:.3e} within CI: {stable}, {:.1} s",
            2.0 / 3.0 - 0.1,
            dt.as_secs_f64()
        ),
    );
}

fn c13_symmetry_transform() {
    let (out, _) = outcome(Subcommand::Transform);
    let (r, s, o) = (value(&out, "roundtrip"), value(&out, "symbol_map"), value(&out, "residual_order"));
    let pass = r <= 1e-10 && s <= 1e-12 && (o - 2.0).abs() <= 0.2;
    report(13, "symmetry transform", pass, format!("round trip {r:.3e} <= 1e-10, symbol {s:.3e} <= 1e-12, order {o:.3} (2 +/- 0.2)"));
}

fn run_cli(dir: &std::path::Path, args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_zkscatter"))
        .args(args)
        .arg("--override")
        .arg(format!("output_dir=\"{}\"", dir.display()))
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs");
    let summary = std::fs::read(dir.join(args[0]).join("summary.json")).unwrap_or_default();
    (out.status.code().unwrap_or(-1), summary)
}

fn c14_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut notes = Vec::new();
    for sub in ["identity", "airy", "norms"] {
        let (ca, ja) = run_cli(a.path(), &[sub]);
        let (cb, jb) = run_cli(b.path(), &[sub]);
        let ok = ca == cb && !ja.is_empty() && ja == jb;
        same &= ok;
        notes.push(format!("{sub} {}", if ok { "identical" } else { "differs" }));
    }
    let bad = a.path().join("bad.toml");
    std::fs::write(&bad, "[identity]\nsamplez = 3\n").unwrap();
    let (code, _) = run_cli(a.path(), &["identity", "--config", bad.to_str().unwrap()]);
    let parsed: Value = serde_json::from_slice(&std::fs::read(a.path().join("identity/summary.json")).unwrap()).unwrap();
    let seed_ok = parsed["seed"].as_u64() == Some(ExperimentConfig::default().seed);
    report(14, "determinism", same && code == 2 && seed_ok, format!("{}; malformed config exit {code} (want 2)", notes.join(", ")));
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn()); 14] = [
        ("c01_key_identity", c01_key_identity),
        ("c02_euler_and_decomposition", c02_euler_and_decomposition),
        ("c03_denominator_bound", c03_denominator_bound),
        ("c04_hormander_mihlin", c04_hormander_mihlin),
        ("c05_dispersive_decay", c05_dispersive_decay),
        ("c06_airy_cross_check", c06_airy_cross_check),
        ("c07_unit_symbol_product", c07_unit_symbol_product),
        ("c08_v2_decay", c08_v2_decay),
        ("c09_v1_decay", c09_v1_decay),
        ("c10_split_recomposition", c10_split_recomposition),
        ("c11_conservation", c11_conservation),
        ("c12_scattering", c12_scattering),
        ("c13_symmetry_transform", c13_symmetry_transform),
        ("c14_determinism", c14_determinism),
    ];
    let mut ran = 0;
    for (name, f) in criteria {
        if filter.is_empty() || filter.iter().any(|p| name.contains(p.as_str())) {
            f();
            ran += 1;
        }
    }
    let failed = FAILED.lock().unwrap_or_else(|e| e.into_inner()).clone();
    let _ = writeln!(std::io::stderr(), "acceptance: {} of {ran} criteria passed", ran - failed.len());
    if !failed.is_empty() {
        let _ = writeln!(std::io::stderr(), "acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
