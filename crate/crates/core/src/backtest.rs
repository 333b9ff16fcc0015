//! Rolling-window walk-forward evaluation.

use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::{Error, EXIT_CONFIG, EXIT_DATA};
use crate::flags::{push_unique, Flag};
use crate::market_data::{compound, simple_returns, PriceTable, ReturnsTable};
use crate::optimizer::{SolverSettings, WeightBounds, Weights};
use crate::portfolio::{
    annual_to_period_return, build_portfolio, period_to_annual_return, period_to_annual_volatility,
    PortfolioObjective, PortfolioResult,
};
use crate::qubo::AnnealSchedule;
use crate::rng::derive_seed;
use crate::stats::{estimate, EstimatorConfig};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient history: {available} return periods, need at least {needed}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("window {index} failed: {source}")]
    Window {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Data(#[from] crate::market_data::DataError),
}

impl BacktestError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BacktestError::InvalidConfig(_) => EXIT_CONFIG,
            BacktestError::InsufficientHistory { .. } | BacktestError::Data(_) => EXIT_DATA,
            BacktestError::Window { source, .. } => source.exit_code(),
        }
    }
}

/// A named objective; labels identify series in every report artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub label: String,
    pub objective: PortfolioObjective,
}

impl ObjectiveSpec {
    pub fn new(label: impl Into<String>, objective: PortfolioObjective) -> Self {
        Self {
            label: label.into(),
            objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub train_periods: usize,
    pub test_periods: usize,
    /// Defaults to `test_periods`.
    pub step_periods: Option<usize>,
    pub objectives: Vec<ObjectiveSpec>,
    pub estimator: EstimatorConfig,
    pub bounds: WeightBounds,
    pub settings: SolverSettings,
    pub schedule: AnnealSchedule,
    /// Annual rate; per-period objectives are expected to be converted already.
    pub risk_free_rate: f64,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            start_date: None,
            end_date: None,
            train_periods: 40,
            test_periods: 5,
            step_periods: None,
            objectives: Vec::new(),
            estimator: EstimatorConfig::default(),
            bounds: WeightBounds::default(),
            settings: SolverSettings::default(),
            schedule: AnnealSchedule::default(),
            risk_free_rate: 0.0,
            seed: 0,
        }
    }
}

impl BacktestConfig {
    pub fn step(&self) -> usize {
        self.step_periods.unwrap_or(self.test_periods)
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: &str| Err(BacktestError::InvalidConfig(m.to_string()));
        if let (Some(s), Some(e)) = (self.start_date, self.end_date) {
            if s >= e {
                return bad("start_date must precede end_date");
            }
        }
        if self.train_periods < 2 {
            return bad("train_periods must be at least 2");
        }
        if self.test_periods < 1 || self.step() < 1 {
            return bad("test_periods and step_periods must be positive");
        }
        if self.objectives.is_empty() {
            return bad("at least one objective is required");
        }
        for (i, o) in self.objectives.iter().enumerate() {
            if self.objectives[..i].iter().any(|p| p.label == o.label) {
                return Err(BacktestError::InvalidConfig(format!("duplicate objective label {}", o.label)));
            }
        }
        if !self.risk_free_rate.is_finite() {
            return bad("risk_free_rate must be finite");
        }
        let wrap = |e: Error| BacktestError::InvalidConfig(e.to_string());
        self.estimator.validate().map_err(|e| wrap(e.into()))?;
        self.bounds.validate().map_err(|e| wrap(e.into()))?;
        self.settings.validate().map_err(|e| wrap(e.into()))?;
        self.schedule.validate().map_err(|e| wrap(e.into()))?;
        Ok(())
    }
}

/// Half-open range of return-period indices plus its first and last dates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub periods: Range<usize>,
    pub first: NaiveDate,
    pub last: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPlan {
    pub index: usize,
    pub train: Span,
    pub test: Span,
}

/// Windows at offsets `0, step, 2*step, ...` over the return-period dates.
/// The last window keeps a short test span if fewer than `test_periods`
/// periods remain.
pub fn plan_windows(dates: &[NaiveDate], config: &BacktestConfig) -> Result<Vec<WindowPlan>, BacktestError> {
    let (train, test, step) = (config.train_periods, config.test_periods, config.step());
    if train < 2 || test < 1 || step < 1 {
        return Err(BacktestError::InvalidConfig("window lengths must be positive".into()));
    }
    let n = dates.len();
    if n < train + 1 {
        return Err(BacktestError::InsufficientHistory {
            needed: train + 1,
            available: n,
        });
    }
    let span = |r: Range<usize>| Span {
        first: dates[r.start],
        last: dates[r.end - 1],
        periods: r,
    };
    let mut plans = Vec::new();
    let mut offset = 0;
    while offset + train < n {
        let test_end = (offset + train + test).min(n);
        plans.push(WindowPlan {
            index: plans.len(),
            train: span(offset..offset + train),
            test: span(offset + train..test_end),
        });
        offset += step;
    }
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWindow {
    pub label: String,
    pub in_sample: PortfolioResult,
    /// `w'r_t` for each test period.
    pub out_of_sample: Vec<f64>,
    pub flags: Vec<Flag>,
}

impl ObjectiveWindow {
    pub fn weights(&self) -> &Weights {
        &self.in_sample.weights
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub window_index: usize,
    pub train_span: Span,
    pub test_span: Span,
    pub test_dates: Vec<NaiveDate>,
    pub objectives: Vec<ObjectiveWindow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub label: String,
    pub daily_returns: Vec<f64>,
    pub cumulative_returns: Vec<f64>,
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    /// `None` when the annualized volatility is zero.
    pub sharpe: Option<f64>,
    pub windows: usize,
    pub flags: Vec<Flag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub tickers: Vec<String>,
    /// Date of each concatenated out-of-sample period.
    pub dates: Vec<NaiveDate>,
    pub objectives: Vec<ObjectiveReport>,
    /// Pearson correlation of the objectives' daily series; `NaN` where a
    /// series has zero variance.
    pub correlation: DMatrix<f64>,
    pub windows: Vec<WindowResult>,
}

impl BacktestReport {
    pub fn objective(&self, label: &str) -> Option<&ObjectiveReport> {
        self.objectives.iter().find(|o| o.label == label)
    }
}

/// Runs every window and objective, then aggregates. A failing window aborts
/// the run with its index.
pub fn run_backtest(prices: &PriceTable, config: &BacktestConfig) -> Result<BacktestReport, BacktestError> {
    config.validate()?;
    let prices = prices.restrict_dates(config.start_date, config.end_date)?;
    if prices.n_dates() < 2 {
        return Err(BacktestError::InsufficientHistory {
            needed: config.train_periods + 1,
            available: prices.n_dates().saturating_sub(1),
        });
    }
    let returns = simple_returns(&prices);
    let plans = plan_windows(returns.dates(), config)?;
    let windows = plans
        .par_iter()
        .map(|plan| {
            run_window(&returns, plan, config).map_err(|e| BacktestError::Window {
                index: plan.index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(prices.tickers().to_vec(), windows, config))
}

fn run_window(returns: &ReturnsTable, plan: &WindowPlan, config: &BacktestConfig) -> Result<WindowResult, Error> {
    let train = returns.slice(plan.train.periods.clone());
    let test = returns.values().rows(plan.test.periods.start, plan.test.periods.len());
    let rf = annual_to_period_return(config.risk_free_rate);
    let short = plan.test.periods.len() < config.test_periods;
    let mut objectives = Vec::with_capacity(config.objectives.len());
    for (k, spec) in config.objectives.iter().enumerate() {
        let labels = [plan.index as u64, k as u64];
        let estimator = EstimatorConfig {
            seed: derive_seed(config.seed, &[labels[0], labels[1], 0]),
            ..config.estimator.clone()
        };
        let schedule = config.schedule.with_seed(derive_seed(config.seed, &[labels[0], labels[1], 1]));
        let stats = estimate(&train, &estimator)?;
        let in_sample = build_portfolio(&spec.objective, &stats, &config.bounds, &config.settings, &schedule, rf)?;
        let w = in_sample.weights.values();
        let out_of_sample = test.row_iter().map(|r| r.transpose().dot(w)).collect();
        let mut flags = in_sample.flags.clone();
        if short {
            push_unique(&mut flags, Flag::ShortTestWindow);
        }
        flags.sort();
        objectives.push(ObjectiveWindow {
            label: spec.label.clone(),
            in_sample,
            out_of_sample,
            flags,
        });
    }
    Ok(WindowResult {
        window_index: plan.index,
        train_span: plan.train.clone(),
        test_span: plan.test.clone(),
        test_dates: returns.dates()[plan.test.periods.clone()].to_vec(),
        objectives,
    })
}

/// Concatenates window results and computes per-objective metrics.
pub fn summarize(tickers: Vec<String>, windows: Vec<WindowResult>, config: &BacktestConfig) -> BacktestReport {
    let dates = windows.iter().flat_map(|w| w.test_dates.iter().copied()).collect();
    let mut objectives = Vec::with_capacity(config.objectives.len());
    for (k, spec) in config.objectives.iter().enumerate() {
        let mut daily = Vec::new();
        let mut flags = Vec::new();
        for w in &windows {
            let ow = &w.objectives[k];
            daily.extend_from_slice(&ow.out_of_sample);
            for f in &ow.flags {
                push_unique(&mut flags, *f);
            }
        }
        flags.sort();
        let m = SeriesMetrics::of(&daily, config.risk_free_rate);
        objectives.push(ObjectiveReport {
            label: spec.label.clone(),
            cumulative_returns: compound(&daily),
            daily_returns: daily,
            annualized_return: m.annualized_return,
            annualized_volatility: m.annualized_volatility,
            sharpe: m.sharpe,
            windows: windows.len(),
            flags,
        });
    }
    let series: Vec<&[f64]> = objectives.iter().map(|o| o.daily_returns.as_slice()).collect();
    let correlation = series_correlation(&series);
    BacktestReport {
        tickers,
        dates,
        objectives,
        correlation,
        windows,
    }
}

/// Annualized statistics of one daily return stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMetrics {
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    pub sharpe: Option<f64>,
}

impl SeriesMetrics {
    /// Mean times 252, sample standard deviation times sqrt(252), and
    /// `(return - risk_free_rate) / volatility` on the annual figures.
    /// A constant or single-period series has zero volatility and no Sharpe ratio.
    pub fn of(daily: &[f64], risk_free_rate: f64) -> Self {
        let n = daily.len();
        if n == 0 {
            return Self {
                annualized_return: 0.0,
                annualized_volatility: 0.0,
                sharpe: None,
            };
        }
        let mean = daily.iter().sum::<f64>() / n as f64;
        let constant = daily.iter().all(|v| *v == daily[0]);
        let sd = if constant || n < 2 {
            0.0
        } else {
            (daily.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let annualized_return = period_to_annual_return(mean);
        let annualized_volatility = period_to_annual_volatility(sd);
        let sharpe = (annualized_volatility > 0.0).then(|| (annualized_return - risk_free_rate) / annualized_volatility);
        Self {
            annualized_return,
            annualized_volatility,
            sharpe,
        }
    }
}

/// Pearson correlation between equally long series. Unit diagonal; `NaN`
/// off the diagonal where either series is constant.
pub fn series_correlation(series: &[&[f64]]) -> DMatrix<f64> {
    let k = series.len();
    let centered: Vec<(Vec<f64>, f64)> = series
        .iter()
        .map(|s| {
            let mean = s.iter().sum::<f64>() / s.len().max(1) as f64;
            let c: Vec<f64> = s.iter().map(|v| v - mean).collect();
            let constant = s.iter().all(|v| *v == s[0]);
            let norm = if constant { 0.0 } else { c.iter().map(|v| v * v).sum::<f64>().sqrt() };
            (c, norm)
        })
        .collect();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            return 1.0;
        }
        let (a, na) = &centered[i];
        let (b, nb) = &centered[j];
        if *na == 0.0 || *nb == 0.0 {
            return f64::NAN;
        }
        // symmetric by construction: same summation order for (i, j) and (j, i)
        let (a, b) = if i < j { (a, b) } else { (b, a) };
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    })
}
