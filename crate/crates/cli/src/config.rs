//! Experiment configuration. One document (TOML or JSON) holds every
//! section; missing sections take their defaults, unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use zkscatter::data::BandSpec;
use zkscatter::dynamics::Equation;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl GridSpec {
    pub fn square(n: usize, l: f64) -> Self {
        Self { nx: n, ny: n, lx: l, ly: l }
    }
    pub fn build(&self) -> Result<std::sync::Arc<zkscatter::Grid>, CliError> {
        zkscatter::make_grid(self.nx, self.ny, self.lx, self.ly).map_err(|e| CliError::Config(e.to_string()))
    }
}

const PI: f64 = std::f64::consts::PI;

fn band(gap_lo: f64, gap_hi: f64, flat: f64, cut: f64) -> BandSpec {
    BandSpec { gap_lo, gap_hi, flat, cut }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Applies to every section without its own grid.
    pub grid: Option<GridSpec>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub identity: IdentityConfig,
    pub hm: HmConfig,
    pub decay: DecayConfig,
    pub airy: AiryConfig,
    pub v2: V2Section,
    pub split: SplitConfig,
    pub conserve: ConserveConfig,
    pub scatter: ScatterSection,
    pub transform: TransformConfig,
    pub norms: NormsConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: None,
            seed: 20240601,
            output_dir: PathBuf::from("zk-out"),
            identity: IdentityConfig::default(),
            hm: HmConfig::default(),
            decay: DecayConfig::default(),
            airy: AiryConfig::default(),
            v2: V2Section::default(),
            split: SplitConfig::default(),
            conserve: ConserveConfig::default(),
            scatter: ScatterSection::default(),
            transform: TransformConfig::default(),
            norms: NormsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Section grid, else the global grid, else `fallback`.
    pub fn grid_for(&self, section: Option<GridSpec>, fallback: GridSpec) -> GridSpec {
        section.or(self.grid).unwrap_or(fallback)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let grids = [self.grid, self.decay.grid, self.airy.grid, self.v2.grid, self.split.grid, self.conserve.grid].into_iter().chain([
            self.scatter.grid,
            self.transform.grid,
            self.norms.grid,
            Some(self.transform.roundtrip_grid),
        ]);
        for g in grids.flatten() {
            g.build()?;
        }
        if self.identity.samples == 0 || self.identity.denominator_samples == 0 {
            return bad("identity: sample counts must be positive");
        }
        if !(self.identity.eta_min > 0.0 && self.identity.eta_min < 5.0) {
            return bad("identity.eta_min must lie in (0, 5)");
        }
        if self.hm.symbols.is_empty() || self.hm.max_order > 2 || self.hm.samples == 0 || self.hm.radii < 2 {
            return bad("hm: need symbols, max_order <= 2, samples > 0, radii >= 2");
        }
        for s in &self.hm.symbols {
            zkscatter::resonance::BilinearSymbol::parse(s).map_err(|e| CliError::Config(e.to_string()))?;
        }
        if !(self.decay.t_min > 0.0) || self.decay.samples < 3 || self.decay.oversample == 0 {
            return bad("decay: t_min > 0, samples >= 3, oversample >= 1");
        }
        if !(self.v2.t_min > 0.0 && self.v2.t_min < self.v2.t_max && self.v2.t_max < self.v2.horizon) || self.v2.samples < 3 {
            return bad("v2: need 0 < t_min < t_max < horizon and samples >= 3");
        }
        if self.split.times.iter().any(|&t| !(t > 0.0 && t < self.split.horizon)) || self.split.times.is_empty() {
            return bad("split: times must lie in (0, horizon)");
        }
        if !(self.conserve.cfl > 0.0) || self.conserve.steps == 0 || self.conserve.candidates.is_empty() {
            return bad("conserve: cfl > 0, steps > 0, candidates non-empty");
        }
        let s = &self.scatter;
        if !(s.t_near > 0.0 && s.t_near < s.t_far && s.epsilon > 0.0 && s.x_norm > 0.0) || s.picard_max == 0 {
            return bad("scatter: need 0 < t_near < t_far, epsilon > 0, x_norm > 0, picard_max > 0");
        }
        let t = &self.transform;
        if t.steps.len() < 2 || t.steps.iter().any(|&h| !(h > 0.0 && h < t.t_center)) || !(t.dt > 0.0) {
            return bad("transform: need >= 2 steps in (0, t_center) and dt > 0");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub samples: usize,
    pub eta_min: f64,
    pub denominator_samples: usize,
    pub key_tol: f64,
    pub euler_tol: f64,
    pub denominator_tol: f64,
    /// Random fields for the unit-symbol product oracle.
    pub product_seeds: usize,
    pub product_tol: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            eta_min: 0.1,
            denominator_samples: 1_000_000,
            key_tol: 1e-10,
            euler_tol: 1e-12,
            denominator_tol: 1e-12,
            product_seeds: 100,
            product_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmConfig {
    pub symbols: Vec<String>,
    pub max_order: usize,
    pub samples: usize,
    pub radii: usize,
    pub max_variation: f64,
}

impl Default for HmConfig {
    fn default() -> Self {
        Self {
            symbols: vec!["m_tr_2".into(), "m_sr_1_1".into(), "dsigma1_m_sr_1_1".into()],
            max_order: 2,
            samples: 400,
            radii: 11,
            max_variation: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayConfig {
    pub grid: Option<GridSpec>,
    /// Flat-top window `(a, b)`: 1 for `|k| ≤ a`, 0 beyond `b`, per axis.
    pub window: (f64, f64),
    pub band: BandSpec,
    pub t_min: f64,
    pub samples: usize,
    pub oversample: usize,
    /// Wrap fraction for the undifferentiated and half-derivative fits.
    pub wrap_fraction: f64,
    /// Wrap fraction for the `W^{3,∞}` fit of the band-pass profile.
    pub band_wrap_fraction: f64,
    pub linf_target: f64,
    pub linf_tol: f64,
    pub weighted_target: f64,
    pub weighted_tol: f64,
    pub w3_target: f64,
    pub w3_tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            grid: None,
            window: (0.8, 1.3),
            band: band(0.1, 0.3, 0.6, 0.9),
            t_min: 10.0,
            samples: 24,
            oversample: 4,
            wrap_fraction: 1.0,
            band_wrap_fraction: 1.0,
            linf_target: -2.0 / 3.0,
            linf_tol: 0.05,
            weighted_target: -1.0,
            weighted_tol: 0.07,
            w3_target: -1.0,
            w3_tol: 0.07,
        }
    }
}

impl DecayConfig {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(128, 64.0 * PI)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AiryConfig {
    pub grid: Option<GridSpec>,
    pub t: f64,
    pub sigma: f64,
    pub probe: usize,
    pub kernel_tol: f64,
    pub propagation_tol: f64,
}

impl Default for AiryConfig {
    fn default() -> Self {
        Self { grid: None, t: 1.0, sigma: 2.0, probe: 16, kernel_tol: 1e-8, propagation_tol: 1e-6 }
    }
}

impl AiryConfig {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(128, 80.0)
    }
}

/// Final data shared by the bilinear experiments: a band-pass profile
/// scaled to a prescribed `X` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub band: BandSpec,
    pub x_norm: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { band: band(0.25, 0.5, 0.75, 1.0), x_norm: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct V2Section {
    pub grid: Option<GridSpec>,
    pub data: DataSpec,
    pub t_min: f64,
    pub t_max: f64,
    pub samples: usize,
    /// Matching time `T` with `v₂(T) = 0`.
    pub horizon: f64,
    pub slope_max: f64,
    pub spread_max: f64,
}

impl Default for V2Section {
    fn default() -> Self {
        Self {
            grid: None,
            data: DataSpec::default(),
            t_min: 5.0,
            t_max: 100.0,
            samples: 12,
            horizon: 2000.0,
            slope_max: -0.9,
            spread_max: 10.0,
        }
    }
}

pub fn bilinear_default_grid() -> GridSpec {
    GridSpec::square(32, 16.0 * PI)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub grid: Option<GridSpec>,
    pub data: DataSpec,
    pub times: Vec<f64>,
    pub horizon: f64,
    pub recomposition_tol: f64,
    /// Times for the decay fit of `‖I_tr‖₂`.
    pub fit_range: (f64, f64),
    pub fit_samples: usize,
    pub slope_max: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            grid: None,
            data: DataSpec::default(),
            times: vec![5.0, 20.0],
            horizon: 2000.0,
            recomposition_tol: 1e-6,
            fit_range: (5.0, 100.0),
            fit_samples: 8,
            slope_max: -0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConserveConfig {
    pub grid: Option<GridSpec>,
    pub equation: Equation,
    pub amplitude: f64,
    pub sigma: f64,
    pub cfl: f64,
    pub steps: usize,
    pub monitor_stride: usize,
    pub candidates: Vec<f64>,
    pub mass_tol: f64,
    pub energy_tol: f64,
}

impl Default for ConserveConfig {
    fn default() -> Self {
        Self {
            grid: None,
            equation: Equation::Physical,
            amplitude: 1.0,
            sigma: 2.0,
            cfl: 0.5,
            steps: 10_000,
            monitor_stride: 10,
            candidates: vec![-1.0 / 6.0, 1.0 / 6.0, -1.0 / 3.0, 1.0 / 3.0],
            mass_tol: 1e-10,
            energy_tol: 1e-8,
        }
    }
}

impl ConserveConfig {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(64, 40.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    pub grid: Option<GridSpec>,
    pub band: BandSpec,
    /// `‖v∞‖_X` after scaling.
    pub x_norm: f64,
    pub epsilon: f64,
    pub t_near: f64,
    pub t_far: f64,
    pub picard_max: usize,
    pub picard_tol: f64,
    pub panel_phase: f64,
    pub alpha_target: f64,
    pub alpha_slack: f64,
    pub ratio_max: f64,
    /// Repeat with doubled `t_far` and halved panels.
    pub stability: bool,
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self {
            grid: None,
            band: band(0.1, 0.2, 0.45, 0.6),
            x_norm: 1e-2,
            epsilon: 1e-2,
            t_near: 2.0,
            t_far: 40.0,
            picard_max: 20,
            picard_tol: 1e-10,
            panel_phase: 2.0,
            alpha_target: 2.0 / 3.0,
            alpha_slack: 0.1,
            ratio_max: 0.5,
            stability: true,
        }
    }
}

impl ScatterSection {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(64, 64.0 * PI)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Physical grid; the symmetric grid has `target_factor` times the points.
    pub grid: Option<GridSpec>,
    /// Grid for the round-trip check of the narrow profile.
    pub roundtrip_grid: GridSpec,
    pub target_factor: f64,
    pub amplitude: f64,
    pub sigma: f64,
    pub roundtrip_sigma: f64,
    pub t_center: f64,
    pub dt: f64,
    /// Snapshot spacings, halving.
    pub steps: Vec<f64>,
    pub symbol_samples: usize,
    pub roundtrip_tol: f64,
    pub symbol_tol: f64,
    pub order_target: f64,
    pub order_tol: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            grid: None,
            roundtrip_grid: GridSpec::square(128, 40.0),
            target_factor: 1.5,
            amplitude: 0.2,
            sigma: 4.0,
            roundtrip_sigma: 1.5,
            t_center: 2.0,
            dt: 0.005,
            steps: vec![0.4, 0.2, 0.1],
            symbol_samples: 10_000,
            roundtrip_tol: 1e-10,
            symbol_tol: 1e-12,
            order_target: 2.0,
            order_tol: 0.2,
        }
    }
}

impl TransformConfig {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(128, 80.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormsConfig {
    pub grid: Option<GridSpec>,
    pub data: DataSpec,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self { grid: None, data: DataSpec { band: band(0.1, 0.2, 0.45, 0.6), x_norm: 1e-2 } }
    }
}

impl NormsConfig {
    pub fn default_grid() -> GridSpec {
        GridSpec::square(64, 64.0 * PI)
    }
}

/// Parse a document by extension (`.json`, otherwise TOML).
pub fn parse_document(text: &str, json: bool) -> Result<Value, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("JSON: {e}")))
    } else {
        toml::from_str::<Value>(text).map_err(|e| CliError::Config(format!("TOML: {e}")))
    }
}

/// Apply `a.b.c=value`; the value is read as a TOML literal, else a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|t| t.get("v").cloned())
        .map(|v| serde_json::to_value(v).expect("TOML values map to JSON"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override path `{path}`")));
    }
    let mut cur = doc;
    for k in &keys[..keys.len() - 1] {
        if !cur.is_object() {
            return Err(CliError::Config(format!("override path `{path}` crosses a non-table value")));
        }
        cur = cur.as_object_mut().expect("checked above").entry(k.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    match cur.as_object_mut() {
        Some(obj) => {
            obj.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!("override path `{path}` crosses a non-table value"))),
    }
}

pub fn from_value(doc: Value) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Read, override and validate. A missing path means all defaults.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse_document(&text, p.extension().is_some_and(|e| e == "json"))?
        }
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    from_value(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load(None, &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = parse_document("seed = 1\nbogus = 2\n", false).unwrap();
        assert!(matches!(from_value(doc), Err(CliError::Config(_))));
        let doc = parse_document("[decay]\nsamplez = 3\n", false).unwrap();
        assert!(matches!(from_value(doc), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_take_toml_literals() {
        let mut doc = parse_document("{\"seed\": 3}", true).unwrap();
        apply_override(&mut doc, "decay.samples=7").unwrap();
        apply_override(&mut doc, "hm.symbols=[\"m_tr_1\"]").unwrap();
        apply_override(&mut doc, "output_dir=out/x").unwrap();
        let cfg = from_value(doc).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.decay.samples, 7);
        assert_eq!(cfg.hm.symbols, vec!["m_tr_1".to_string()]);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut doc = Value::Object(Default::default());
        apply_override(&mut doc, "hm.symbols=[\"nope\"]").unwrap();
        assert!(from_value(doc).is_err());
        let mut doc = Value::Object(Default::default());
        apply_override(&mut doc, "scatter.t_near=100.0").unwrap();
        assert!(from_value(doc).is_err());
        assert!(apply_override(&mut Value::Object(Default::default()), "novalue").is_err());
    }
}
