//! Summaries, pass checks and the files written for each run.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use zkscatter::fieldio;
use zkscatter::SpectralField;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-10`.
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Self { name: name.into(), value, rule: format!("<= {max:e}"), pass: value <= max }
    }
    pub fn at_least(name: &str, value: f64, min: f64) -> Self {
        Self { name: name.into(), value, rule: format!(">= {min:e}"), pass: value >= min }
    }
    pub fn below(name: &str, value: f64, max: f64) -> Self {
        Self { name: name.into(), value, rule: format!("< {max:e}"), pass: value < max }
    }
    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self { name: name.into(), value, rule: format!("{target:.6} +/- {tol}"), pass: (value - target).abs() <= tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub subcommand: String,
    pub seed: u64,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub details: Value,
}

impl Summary {
    pub fn new(subcommand: &str, seed: u64, checks: Vec<Check>, details: Value) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { subcommand: subcommand.into(), seed, pass, checks, details }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Everything a subcommand produces.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    /// `(file stem, CSV text)`.
    pub csv: Vec<(String, String)>,
    pub fields: Vec<(String, SpectralField)>,
}

/// CSV text from a header and equally long columns.
pub fn csv_columns(header: &[&str], columns: &[&[f64]]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    let rows = columns.iter().map(|c| c.len()).min().unwrap_or(0);
    for r in 0..rows {
        let line: Vec<String> = columns.iter().map(|c| format!("{:.17e}", c[r])).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summaries serialize");
    s.push('\n');
    s
}

/// Write `summary.json`, the CSV series and ZKF1 fields under `dir`.
pub fn write_outcome(dir: &Path, out: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), to_json(&out.summary))?;
    for (stem, text) in &out.csv {
        fs::write(dir.join(format!("{stem}.csv")), text)?;
    }
    for (stem, f) in &out.fields {
        fieldio::save_spectral(dir.join(format!("{stem}.zkf")), f)?;
    }
    Ok(())
}

pub fn write_error(dir: &Path, subcommand: &str, err: &CliError) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let v = serde_json::json!({ "subcommand": subcommand, "pass": false, "error": err.to_string() });
    fs::write(dir.join("error.json"), to_json(&v))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checks_and_summary() {
        let c = vec![Check::at_most("a", 1.0, 2.0), Check::within("b", -0.7, -2.0 / 3.0, 0.05)];
        let s = Summary::new("x", 1, c, Value::Null);
        assert!(s.pass);
        assert!(!Check::below("c", 10.0, 10.0).pass);
        assert!(Check::at_least("d", 1.0, 1.0).pass);
        let csv = csv_columns(&["t", "v"], &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(csv.lines().count(), 3);
    }
}
