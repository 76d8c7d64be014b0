//! Run configuration: TOML file values overridden by command-line
//! flags, then defaults.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lear::engine::EngineConfig;
use lear::lasso::SelectionCriterion;
use lear::scaling::ScalingMethod;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult, CommonArgs};

/// Raw config file contents; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub window_days: Option<u32>,
    pub recalib_every: Option<u32>,
    pub scaling: Option<String>,
    pub criterion: Option<String>,
    pub spike_sigma: Option<f64>,
    pub spike_window_days: Option<u32>,
    pub low_quantile: Option<f64>,
    pub seed: Option<u64>,
    pub lenient: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("bad config {}: {e}", p.display())))
            }
        }
    }
}

/// Fully resolved configuration, hashed into the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub window_days: u32,
    pub recalib_every: u32,
    pub scaling: ScalingMethod,
    pub criterion: SelectionCriterion,
    pub spike_sigma: f64,
    pub spike_window_days: u32,
    pub low_quantile: Option<f64>,
    pub seed: u64,
    pub lenient: bool,
}

pub struct Overrides {
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub window_days: Option<u32>,
    pub recalib_every: Option<u32>,
    pub scaling: Option<String>,
    pub criterion: Option<String>,
    pub spike_sigma: Option<f64>,
    pub spike_window_days: Option<u32>,
    pub low_quantile: Option<f64>,
    pub lenient: Option<bool>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            from: None,
            to: None,
            window_days: None,
            recalib_every: None,
            scaling: None,
            criterion: None,
            spike_sigma: None,
            spike_window_days: None,
            low_quantile: None,
            lenient: None,
        }
    }
}

fn parse_scaling(s: &str) -> CliResult<ScalingMethod> {
    s.parse().map_err(CliError::Validation)
}

fn parse_criterion(s: &str) -> CliResult<SelectionCriterion> {
    s.parse().map_err(CliError::Validation)
}

/// Resolves flags over file values over defaults and validates the
/// result.
pub fn resolve(common: &CommonArgs, overrides: Overrides) -> CliResult<RunConfig> {
    let file = FileConfig::load(common.config.as_deref())?;

    let data = common
        .data
        .clone()
        .or(file.data)
        .ok_or_else(|| CliError::Validation("--data is required".into()))?;
    let out = common
        .out
        .clone()
        .or(file.out)
        .ok_or_else(|| CliError::Validation("--out is required".into()))?;

    let scaling = match overrides.scaling.as_deref().or(file.scaling.as_deref()) {
        Some(s) => parse_scaling(s)?,
        None => ScalingMethod::MedianMadAsinh,
    };
    let criterion = match overrides.criterion.as_deref().or(file.criterion.as_deref()) {
        Some(s) => parse_criterion(s)?,
        None => SelectionCriterion::Aic,
    };

    let cfg = RunConfig {
        data,
        out,
        from: overrides.from.or(file.from),
        to: overrides.to.or(file.to),
        window_days: overrides.window_days.or(file.window_days).unwrap_or(365),
        recalib_every: overrides.recalib_every.or(file.recalib_every).unwrap_or(1),
        scaling,
        criterion,
        spike_sigma: overrides.spike_sigma.or(file.spike_sigma).unwrap_or(3.0),
        spike_window_days: overrides
            .spike_window_days
            .or(file.spike_window_days)
            .unwrap_or(30),
        low_quantile: overrides.low_quantile.or(file.low_quantile),
        seed: common.seed.or(file.seed).unwrap_or(0),
        lenient: overrides.lenient.or(file.lenient).unwrap_or(false),
    };

    if cfg.window_days < 30 {
        return Err(CliError::Validation(format!(
            "window length must be at least 30 days, got {}",
            cfg.window_days
        )));
    }
    if cfg.recalib_every < 1 {
        return Err(CliError::Validation("recalib-every must be >= 1".into()));
    }
    if let Some(q) = cfg.low_quantile {
        if !(0.0..=1.0).contains(&q) {
            return Err(CliError::Validation(format!(
                "low-quantile must lie in [0, 1], got {q}"
            )));
        }
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            window_length: self.window_days,
            scaling: self.scaling,
            criterion: self.criterion,
            recalib_every: self.recalib_every,
            ..EngineConfig::default()
        }
    }

    pub fn label_config(&self) -> lear::diagnostics::LabelConfig {
        lear::diagnostics::LabelConfig {
            window_days: self.spike_window_days,
            sigma: self.spike_sigma,
            low_quantile: self.low_quantile,
        }
    }
}
