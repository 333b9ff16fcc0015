//! Mean-variance portfolio construction, QUBO asset selection by simulated
//! annealing, and rolling-window backtesting with SVG/CSV reporting.
//!
//! Library rates are per period; see [`portfolio::annual_to_period_return`].
//!
//! ```
//! use portopt::market_data::{load_prices, simple_returns};
//! use portopt::optimizer::{SolverSettings, WeightBounds};
//! use portopt::portfolio::{annual_to_period_return, build_portfolio, PortfolioObjective};
//! use portopt::qubo::AnnealSchedule;
//! use portopt::stats::{estimate, EstimatorConfig};
//!
//! # fn main() -> portopt::Result<()> {
//! let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/synthetic_prices.csv");
//! let tickers: Vec<String> = ["SYN1", "SYN2", "SYN3"].map(String::from).to_vec();
//! let prices = load_prices(path.as_ref(), &tickers, None)?;
//! let stats = estimate(&simple_returns(&prices), &EstimatorConfig::default())?;
//! let mvp = build_portfolio(
//!     &PortfolioObjective::Mvp { target_return: annual_to_period_return(0.20) },
//!     &stats,
//!     &WeightBounds::default(),
//!     &SolverSettings::default(),
//!     &AnnealSchedule::default(),
//!     0.0,
//! )?;
//! assert!((mvp.weights.values().sum() - 1.0).abs() < 1e-9);
//! assert!(mvp.expected_return >= annual_to_period_return(0.20) - 1e-12);
//! # Ok(())
//! # }
//! ```

pub mod backtest;
pub mod cli;
pub mod config;
pub mod error;
pub mod flags;
pub mod market_data;
pub mod optimizer;
pub mod portfolio;
pub mod qubo;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
