//! Objective dispatch and portfolio-level statistics.

use std::fmt;

use nalgebra::DVector;

use crate::error::Result;
use crate::flags::{push_unique, Flag};
use crate::optimizer::{self, FrontierPoint, SolverError, SolverSettings, WeightBounds, Weights};
use crate::qubo::{self, AnnealSchedule};
use crate::stats::ExpectedStats;

/// Trading periods per year used for every annual/per-period conversion.
pub const PERIODS_PER_YEAR: f64 = 252.0;

pub fn annual_to_period_return(annual: f64) -> f64 {
    annual / PERIODS_PER_YEAR
}

pub fn annual_to_period_volatility(annual: f64) -> f64 {
    annual / PERIODS_PER_YEAR.sqrt()
}

pub fn period_to_annual_return(per_period: f64) -> f64 {
    per_period * PERIODS_PER_YEAR
}

pub fn period_to_annual_volatility(per_period: f64) -> f64 {
    per_period * PERIODS_PER_YEAR.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectiveKind {
    Ewp,
    Mcp,
    Mvp,
    Mrp,
    Msrp,
    Mop,
    Bmop,
}

impl ObjectiveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveKind::Ewp => "EWP",
            ObjectiveKind::Mcp => "MCP",
            ObjectiveKind::Mvp => "MVP",
            ObjectiveKind::Mrp => "MRP",
            ObjectiveKind::Msrp => "MSRP",
            ObjectiveKind::Mop => "MOP",
            ObjectiveKind::Bmop => "BMOP",
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Portfolio construction rule. All rates are per period.
#[derive(Debug, Clone, PartialEq)]
pub enum PortfolioObjective {
    /// Equal weights.
    Ewp,
    /// Weights proportional to market capitalization.
    Mcp { market_caps: Vec<f64> },
    /// Minimum variance with return at least `target_return`.
    Mvp { target_return: f64 },
    /// Maximum return with volatility at most `target_volatility`.
    Mrp { target_volatility: f64 },
    /// Maximum Sharpe ratio against `risk_free_rate`.
    Msrp { risk_free_rate: f64 },
    /// `min w'Sw - risk_aversion * w'r`.
    Mop { risk_aversion: f64 },
    /// Binary selection of the MOP objective, equally weighted.
    Bmop { risk_aversion: f64 },
}

impl PortfolioObjective {
    pub fn kind(&self) -> ObjectiveKind {
        match self {
            PortfolioObjective::Ewp => ObjectiveKind::Ewp,
            PortfolioObjective::Mcp { .. } => ObjectiveKind::Mcp,
            PortfolioObjective::Mvp { .. } => ObjectiveKind::Mvp,
            PortfolioObjective::Mrp { .. } => ObjectiveKind::Mrp,
            PortfolioObjective::Msrp { .. } => ObjectiveKind::Msrp,
            PortfolioObjective::Mop { .. } => ObjectiveKind::Mop,
            PortfolioObjective::Bmop { .. } => ObjectiveKind::Bmop,
        }
    }

    pub fn validate(&self, n_assets: usize) -> Result<(), SolverError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::InvalidParameter(format!("{name} must be finite")))
            }
        };
        match self {
            PortfolioObjective::Ewp => Ok(()),
            PortfolioObjective::Mcp { market_caps } => {
                if market_caps.len() != n_assets {
                    return Err(SolverError::DimensionMismatch(format!(
                        "{} market caps for {} assets",
                        market_caps.len(),
                        n_assets
                    )));
                }
                if market_caps.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return Err(SolverError::InvalidParameter("market caps must be positive".into()));
                }
                Ok(())
            }
            PortfolioObjective::Mvp { target_return } => finite("target_return", *target_return),
            PortfolioObjective::Mrp { target_volatility } => {
                finite("target_volatility", *target_volatility)?;
                if *target_volatility <= 0.0 {
                    return Err(SolverError::InvalidParameter("target_volatility must be positive".into()));
                }
                Ok(())
            }
            PortfolioObjective::Msrp { risk_free_rate } => finite("risk_free_rate", *risk_free_rate),
            PortfolioObjective::Mop { risk_aversion } | PortfolioObjective::Bmop { risk_aversion } => {
                finite("risk_aversion", *risk_aversion)?;
                if *risk_aversion < 0.0 {
                    return Err(SolverError::InvalidParameter("risk_aversion must be non-negative".into()));
                }
                Ok(())
            }
        }
    }
}

/// `(r_p, sigma_p, S_p)`; the Sharpe ratio is `None` when `sigma_p = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioStats {
    pub expected_return: f64,
    pub volatility: f64,
    pub sharpe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioResult {
    pub weights: Weights,
    pub expected_return: f64,
    pub volatility: f64,
    pub sharpe: Option<f64>,
    pub flags: Vec<Flag>,
}

/// `r_p = w'r`, `sigma_p^2 = w'Sw`, `S_p = (r_p - r_rf) / sigma_p`.
pub fn portfolio_stats(weights: &Weights, stats: &ExpectedStats, risk_free_rate: f64) -> Result<PortfolioStats, SolverError> {
    if weights.len() != stats.n_assets() {
        return Err(SolverError::DimensionMismatch(format!(
            "{} weights for {} assets",
            weights.len(),
            stats.n_assets()
        )));
    }
    let w = weights.values();
    let expected_return = stats.mean().dot(w);
    let variance = w.dot(&(stats.covariance() * w));
    let volatility = variance.max(0.0).sqrt();
    let sharpe = (volatility > 0.0).then(|| (expected_return - risk_free_rate) / volatility);
    Ok(PortfolioStats {
        expected_return,
        volatility,
        sharpe,
    })
}

/// Builds the portfolio for `objective`. `risk_free_rate` (per period) is
/// used for the reported Sharpe ratio.
pub fn build_portfolio(
    objective: &PortfolioObjective,
    stats: &ExpectedStats,
    bounds: &WeightBounds,
    settings: &SolverSettings,
    schedule: &AnnealSchedule,
    risk_free_rate: f64,
) -> Result<PortfolioResult> {
    let n = stats.n_assets();
    objective.validate(n)?;
    let tickers = stats.tickers();
    let (weights, mut flags) = match objective {
        PortfolioObjective::Ewp => (Weights::equal(tickers), Vec::new()),
        PortfolioObjective::Mcp { market_caps } => {
            let total: f64 = market_caps.iter().sum();
            let w = DVector::from_iterator(n, market_caps.iter().map(|c| c / total));
            (Weights::new(tickers.to_vec(), w)?, Vec::new())
        }
        PortfolioObjective::Mvp { target_return } => {
            let s = optimizer::solve_mvp(stats, *target_return, bounds, settings)?;
            (s.weights, s.flags)
        }
        PortfolioObjective::Mrp { target_volatility } => {
            let s = optimizer::solve_mrp(stats, *target_volatility, bounds, settings)?;
            (s.weights, s.flags)
        }
        PortfolioObjective::Msrp { risk_free_rate } => {
            let s = optimizer::solve_msrp(stats, *risk_free_rate, bounds, settings)?;
            (s.weights, s.flags)
        }
        PortfolioObjective::Mop { risk_aversion } => {
            let s = optimizer::solve_mop(stats, *risk_aversion, bounds, settings)?;
            (s.weights, s.flags)
        }
        PortfolioObjective::Bmop { risk_aversion } => {
            let model = qubo::build_bmop(stats, *risk_aversion)?;
            let x = qubo::anneal(&model, schedule)?;
            qubo::selection_to_weights(&x, tickers)
        }
    };
    flags.sort();
    flags.dedup();
    let ps = portfolio_stats(&weights, stats, risk_free_rate)?;
    let mut result = PortfolioResult {
        weights,
        expected_return: ps.expected_return,
        volatility: ps.volatility,
        sharpe: ps.sharpe,
        flags: Vec::new(),
    };
    for f in flags {
        push_unique(&mut result.flags, f);
    }
    Ok(result)
}

/// MVP solutions at `points` uniformly spaced target returns, from the
/// minimum-variance portfolio's return to the bounded maximum return.
pub fn efficient_frontier(
    stats: &ExpectedStats,
    bounds: &WeightBounds,
    settings: &SolverSettings,
    points: usize,
) -> Result<Vec<FrontierPoint>, SolverError> {
    if points < 2 {
        return Err(SolverError::InvalidParameter("a frontier needs at least 2 points".into()));
    }
    optimizer::frontier_sweep(stats, bounds, settings, points)
}
