//! JSON run configuration.
//!
//! Unknown keys are rejected everywhere. Rates are given annually and
//! converted to per-period values with the 252-period year.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;
use thiserror::Error;

use crate::backtest::{BacktestConfig, ObjectiveSpec};
use crate::optimizer::{SolverSettings, WeightBounds};
use crate::portfolio::{annual_to_period_return, annual_to_period_volatility, PortfolioObjective};
use crate::qubo::AnnealSchedule;
use crate::rng::derive_seed;
use crate::stats::{EstimatorConfig, EstimatorMode};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error at `{key}`: {message}")]
    Parse { key: String, message: String },
    #[error("invalid config value at `{key}`: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV, relative to the config file's directory.
    pub data: PathBuf,
    pub tickers: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Relative to the config file's directory; `--out` overrides it.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Parsed-price cache directory; the environment variable overrides it.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Annual risk-free rate.
    #[serde(default)]
    pub risk_free_rate: f64,
    #[serde(default)]
    pub bounds: WeightBounds,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub anneal: AnnealSection,
    pub objectives: Vec<ObjectiveConfig>,
    #[serde(default)]
    pub backtest: BacktestSection,
    #[serde(default)]
    pub figures: FigureToggles,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub mode: EstimatorMode,
    pub window_length: Option<usize>,
    pub sample_count: usize,
    pub half_life: Option<f64>,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        Self {
            mode: d.mode,
            window_length: d.window_length,
            sample_count: d.sample_count,
            half_life: d.half_life,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealSection {
    pub sweeps: usize,
    pub restarts: usize,
    pub beta_initial: Option<f64>,
    pub beta_final: Option<f64>,
}

impl Default for AnnealSection {
    fn default() -> Self {
        let d = AnnealSchedule::default();
        Self {
            sweeps: d.sweeps,
            restarts: d.restarts,
            beta_initial: d.beta_initial,
            beta_final: d.beta_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktestSection {
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub train_periods: usize,
    pub test_periods: usize,
    pub step_periods: Option<usize>,
}

impl Default for BacktestSection {
    fn default() -> Self {
        Self {
            start_date: None,
            end_date: None,
            train_periods: 40,
            test_periods: 5,
            step_periods: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FigureToggles {
    pub cumulative_returns: bool,
    pub return_distribution: bool,
    pub correlation_heatmap: bool,
    pub frontier_scatter: bool,
}

impl Default for FigureToggles {
    fn default() -> Self {
        Self {
            cumulative_returns: true,
            return_distribution: true,
            correlation_heatmap: true,
            frontier_scatter: true,
        }
    }
}

fn default_target_return() -> f64 {
    0.20
}

fn default_target_volatility() -> f64 {
    0.05
}

fn default_risk_aversion() -> f64 {
    1.0
}

/// One objective entry, tagged by `kind`. Targets are annual.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ObjectiveConfig {
    #[serde(rename = "EWP")]
    Ewp {
        #[serde(default)]
        label: Option<String>,
    },
    #[serde(rename = "MCP")]
    Mcp {
        #[serde(default)]
        label: Option<String>,
        market_caps: Vec<f64>,
    },
    #[serde(rename = "MVP")]
    Mvp {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_target_return")]
        target_return: f64,
    },
    #[serde(rename = "MRP")]
    Mrp {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_target_volatility")]
        target_volatility: f64,
    },
    #[serde(rename = "MSRP")]
    Msrp {
        #[serde(default)]
        label: Option<String>,
    },
    #[serde(rename = "MOP")]
    Mop {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_risk_aversion")]
        risk_aversion: f64,
    },
    #[serde(rename = "BMOP")]
    Bmop {
        #[serde(default)]
        label: Option<String>,
        #[serde(default = "default_risk_aversion")]
        risk_aversion: f64,
    },
}

impl ObjectiveConfig {
    fn kind_name(&self) -> &'static str {
        match self {
            ObjectiveConfig::Ewp { .. } => "EWP",
            ObjectiveConfig::Mcp { .. } => "MCP",
            ObjectiveConfig::Mvp { .. } => "MVP",
            ObjectiveConfig::Mrp { .. } => "MRP",
            ObjectiveConfig::Msrp { .. } => "MSRP",
            ObjectiveConfig::Mop { .. } => "MOP",
            ObjectiveConfig::Bmop { .. } => "BMOP",
        }
    }

    /// The explicit label, or the kind name.
    pub fn label(&self) -> String {
        let l = match self {
            ObjectiveConfig::Ewp { label }
            | ObjectiveConfig::Mcp { label, .. }
            | ObjectiveConfig::Mvp { label, .. }
            | ObjectiveConfig::Mrp { label, .. }
            | ObjectiveConfig::Msrp { label }
            | ObjectiveConfig::Mop { label, .. }
            | ObjectiveConfig::Bmop { label, .. } => label,
        };
        l.clone().unwrap_or_else(|| self.kind_name().to_string())
    }

    /// Per-period objective; `annual_risk_free` feeds the MSRP rule.
    pub fn to_objective(&self, annual_risk_free: f64) -> PortfolioObjective {
        match self {
            ObjectiveConfig::Ewp { .. } => PortfolioObjective::Ewp,
            ObjectiveConfig::Mcp { market_caps, .. } => PortfolioObjective::Mcp {
                market_caps: market_caps.clone(),
            },
            ObjectiveConfig::Mvp { target_return, .. } => PortfolioObjective::Mvp {
                target_return: annual_to_period_return(*target_return),
            },
            ObjectiveConfig::Mrp { target_volatility, .. } => PortfolioObjective::Mrp {
                target_volatility: annual_to_period_volatility(*target_volatility),
            },
            ObjectiveConfig::Msrp { .. } => PortfolioObjective::Msrp {
                risk_free_rate: annual_to_period_return(annual_risk_free),
            },
            ObjectiveConfig::Mop { risk_aversion, .. } => PortfolioObjective::Mop {
                risk_aversion: *risk_aversion,
            },
            ObjectiveConfig::Bmop { risk_aversion, .. } => PortfolioObjective::Bmop {
                risk_aversion: *risk_aversion,
            },
        }
    }
}

/// Seed-stream labels for the top-level fan-out.
const ESTIMATOR_STREAM: u64 = 1;
const ANNEAL_STREAM: u64 = 2;
const BACKTEST_STREAM: u64 = 3;

impl RunConfig {
    /// Parses JSON, reporting the key path of the first error.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Parse {
                key,
                message: e.into_inner().to_string(),
            }
        })
    }

    /// Reads, parses, resolves relative paths against the file's directory
    /// and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.data = base.join(&self.data);
        self.output_dir = self.output_dir.as_ref().map(|p| base.join(p));
        self.cache_dir = self.cache_dir.as_ref().map(|p| base.join(p));
    }

    /// Value checks plus existence of the data file.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.data.is_file() {
            return Err(invalid("data", format!("{} is not a readable file", self.data.display())));
        }
        self.validate_values()
    }

    /// Checks that need no filesystem access.
    pub fn validate_values(&self) -> Result<(), ConfigError> {
        if self.tickers.is_empty() {
            return Err(invalid("tickers", "at least one ticker is required"));
        }
        for (i, t) in self.tickers.iter().enumerate() {
            if t.trim().is_empty() {
                return Err(invalid(format!("tickers[{i}]"), "empty ticker"));
            }
            if self.tickers[..i].contains(t) {
                return Err(invalid(format!("tickers[{i}]"), format!("duplicate ticker {t}")));
            }
        }
        if !self.risk_free_rate.is_finite() {
            return Err(invalid("risk_free_rate", "must be finite"));
        }
        self.bounds.validate().map_err(|e| invalid("bounds", e))?;
        self.bounds
            .check_feasible(self.tickers.len())
            .map_err(|e| invalid("bounds", e))?;
        self.estimator_config(0).validate().map_err(|e| invalid("estimator", e))?;
        self.solver.validate().map_err(|e| invalid("solver", e))?;
        self.schedule(0).validate().map_err(|e| invalid("anneal", e))?;
        if self.objectives.is_empty() {
            return Err(invalid("objectives", "at least one objective is required"));
        }
        let n = self.tickers.len();
        let mut labels: Vec<String> = Vec::new();
        for (i, o) in self.objectives.iter().enumerate() {
            let key = format!("objectives[{i}]");
            let label = o.label();
            if label.trim().is_empty() {
                return Err(invalid(format!("{key}.label"), "empty label"));
            }
            if labels.contains(&label) {
                return Err(invalid(format!("{key}.label"), format!("duplicate label {label}")));
            }
            labels.push(label);
            o.to_objective(self.risk_free_rate)
                .validate(n)
                .map_err(|e| invalid(key.clone(), e))?;
        }
        let b = &self.backtest;
        if let (Some(s), Some(e)) = (b.start_date, b.end_date) {
            if s >= e {
                return Err(invalid("backtest.end_date", "must be after start_date"));
            }
        }
        if b.train_periods < 2 {
            return Err(invalid("backtest.train_periods", "must be at least 2"));
        }
        if b.test_periods < 1 {
            return Err(invalid("backtest.test_periods", "must be at least 1"));
        }
        if b.step_periods == Some(0) {
            return Err(invalid("backtest.step_periods", "must be at least 1"));
        }
        Ok(())
    }

    pub fn estimator_config(&self, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            mode: self.estimator.mode,
            window_length: self.estimator.window_length,
            sample_count: self.estimator.sample_count,
            half_life: self.estimator.half_life,
            seed: derive_seed(seed, &[ESTIMATOR_STREAM]),
        }
    }

    pub fn schedule(&self, seed: u64) -> AnnealSchedule {
        AnnealSchedule {
            sweeps: self.anneal.sweeps,
            restarts: self.anneal.restarts,
            beta_initial: self.anneal.beta_initial,
            beta_final: self.anneal.beta_final,
            seed: derive_seed(seed, &[ANNEAL_STREAM]),
        }
    }

    pub fn objective_specs(&self) -> Vec<ObjectiveSpec> {
        self.objectives
            .iter()
            .map(|o| ObjectiveSpec::new(o.label(), o.to_objective(self.risk_free_rate)))
            .collect()
    }

    /// Backtest parameters with every seed derived from `seed`.
    pub fn backtest_config(&self, seed: u64) -> BacktestConfig {
        BacktestConfig {
            start_date: self.backtest.start_date,
            end_date: self.backtest.end_date,
            train_periods: self.backtest.train_periods,
            test_periods: self.backtest.test_periods,
            step_periods: self.backtest.step_periods,
            objectives: self.objective_specs(),
            estimator: self.estimator_config(seed),
            bounds: self.bounds,
            settings: self.solver,
            schedule: self.schedule(seed),
            risk_free_rate: self.risk_free_rate,
            seed: derive_seed(seed, &[BACKTEST_STREAM]),
        }
    }
}
