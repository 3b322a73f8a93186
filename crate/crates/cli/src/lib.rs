//! Experiment runner for the `zkscatter` library.
//!
//! Every verification is a subcommand driven by a single configuration
//! document. A run writes `summary.json`, CSV series and ZKF1 fields to
//! `<output_dir>/<subcommand>/` and reports pass or fail through its exit
//! code.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use zkscatter::ZkError;

pub use config::ExperimentConfig;
pub use output::{Check, Outcome, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] ZkError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
#[value(rename_all = "lowercase")]
pub enum Subcommand {
    Identity,
    Hm,
    Decay,
    Airy,
    V2,
    Split,
    Conserve,
    Scatter,
    Transform,
    Norms,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Identity,
        Subcommand::Hm,
        Subcommand::Decay,
        Subcommand::Airy,
        Subcommand::V2,
        Subcommand::Split,
        Subcommand::Conserve,
        Subcommand::Scatter,
        Subcommand::Transform,
        Subcommand::Norms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Identity => "identity",
            Subcommand::Hm => "hm",
            Subcommand::Decay => "decay",
            Subcommand::Airy => "airy",
            Subcommand::V2 => "v2",
            Subcommand::Split => "split",
            Subcommand::Conserve => "conserve",
            Subcommand::Scatter => "scatter",
            Subcommand::Transform => "transform",
            Subcommand::Norms => "norms",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Compute a subcommand without touching the filesystem.
pub fn execute(sub: Subcommand, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match sub {
        Subcommand::Identity => experiments::identity(cfg),
        Subcommand::Hm => experiments::hm(cfg),
        Subcommand::Decay => experiments::decay(cfg),
        Subcommand::Airy => experiments::airy(cfg),
        Subcommand::V2 => experiments::v2(cfg),
        Subcommand::Split => experiments::split(cfg),
        Subcommand::Conserve => experiments::conserve(cfg),
        Subcommand::Scatter => experiments::scatter(cfg),
        Subcommand::Transform => experiments::transform(cfg),
        Subcommand::Norms => experiments::norms(cfg),
    }
}

pub fn output_dir(cfg: &ExperimentConfig, sub: Subcommand) -> PathBuf {
    cfg.output_dir.join(sub.name())
}

/// Compute and write results. `Ok` carries the summary whether or not its
/// checks passed; numerical failures leave `error.json` behind.
pub fn run(sub: Subcommand, cfg: &ExperimentConfig) -> Result<Summary, CliError> {
    let dir = output_dir(cfg, sub);
    match execute(sub, cfg) {
        Ok(out) => {
            output::write_outcome(&dir, &out)?;
            Ok(out.summary)
        }
        Err(e) => {
            if !matches!(e, CliError::Config(_)) {
                output::write_error(&dir, sub.name(), &e)?;
            }
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommand_names_round_trip() {
        for s in Subcommand::ALL {
            assert_eq!(Subcommand::parse(s.name()), Some(s));
        }
        assert_eq!(Subcommand::parse("nope"), None);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(ZkError::GridMismatch).exit_code(), 1);
    }
}
