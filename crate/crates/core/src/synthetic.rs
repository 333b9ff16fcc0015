//! Seeded synthetic price paths with independent Gaussian returns.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};

use crate::market_data::PriceTable;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSpec {
    pub ticker: String,
    /// Per-period mean return.
    pub mean: f64,
    /// Per-period standard deviation.
    pub volatility: f64,
}

impl AssetSpec {
    pub fn new(ticker: impl Into<String>, mean: f64, volatility: f64) -> Self {
        Self {
            ticker: ticker.into(),
            mean,
            volatility,
        }
    }
}

/// `count` consecutive weekdays starting at the first weekday on or after `start`.
pub fn weekdays(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// `periods + 1` prices per asset starting at 100. Asset `j` draws its
/// returns from the stream `(seed, [j])`; returns are floored at -0.99.
pub fn gaussian_prices(assets: &[AssetSpec], periods: usize, seed: u64, start: NaiveDate) -> PriceTable {
    let n = assets.len();
    let mut prices = DMatrix::zeros(periods + 1, n);
    for (j, a) in assets.iter().enumerate() {
        let normal = Normal::new(a.mean, a.volatility).expect("finite non-negative volatility");
        let mut g = stream(seed, &[j as u64]);
        let mut p = 100.0;
        prices[(0, j)] = p;
        for t in 1..=periods {
            let r: f64 = normal.sample(&mut g);
            p *= 1.0 + r.max(-0.99);
            prices[(t, j)] = p;
        }
    }
    let tickers = assets.iter().map(|a| a.ticker.clone()).collect();
    PriceTable::new(tickers, weekdays(start, periods + 1), prices).expect("positive synthetic prices")
}

pub const FIXTURE_SEED: u64 = 20_200_101;
pub const FIXTURE_PERIODS: usize = 2_000;

/// Five uncorrelated assets with return rising alongside volatility.
pub fn fixture_assets() -> Vec<AssetSpec> {
    [(0.0002, 0.001), (0.0006, 0.002), (0.0012, 0.003), (0.0020, 0.004), (0.0030, 0.005)]
        .iter()
        .enumerate()
        .map(|(i, &(m, s))| AssetSpec::new(format!("SYN{}", i + 1), m, s))
        .collect()
}

/// The bundled backtest fixture: 2 000 return periods of [`fixture_assets`].
pub fn fixture_prices() -> PriceTable {
    gaussian_prices(
        &fixture_assets(),
        FIXTURE_PERIODS,
        FIXTURE_SEED,
        NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date"),
    )
}
