//! Expected-return and covariance estimation.
//!
//! Three estimator modes share one window machinery:
//!
//! * `full` uses every period once.
//! * `random` draws `sample_count` contiguous windows of `window_length`
//!   periods with uniformly random start offsets, and takes the elementwise
//!   median of the per-window means and covariances.
//! * `weighted` draws windows the same way and averages them with weight
//!   `2^(-age / half_life)`, where `age` counts the periods between the
//!   window's last period and the last period of the sample.
//!
//! Aggregated covariances are projected back onto the PSD cone by clipping
//! negative eigenvalues when needed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::ReturnsTable;
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} return periods, found {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("window of {window} periods exceeds the {available} available")]
    WindowTooLong { window: usize, available: usize },
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid expected statistics: {0}")]
    Invalid(String),
}

/// Covariance symmetry tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as PSD.
pub const PSD_TOL: f64 = 1e-10;
/// Relative ridge used for singular covariances: `eps = RIDGE_SCALE * trace / N`.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    #[default]
    Full,
    Random,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Periods per window; `None` means `max(2, floor(sample / 2))`.
    pub window_length: Option<usize>,
    pub sample_count: usize,
    /// Half-life in periods; `None` means half the span of start offsets
    /// (at least one period). `f64::INFINITY` flattens the weights.
    pub half_life: Option<f64>,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::Full,
            window_length: None,
            sample_count: 32,
            half_life: None,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.sample_count == 0 {
            return Err(StatsError::InvalidConfig("sample_count must be at least 1".into()));
        }
        if let Some(w) = self.window_length {
            if w < 2 {
                return Err(StatsError::InvalidConfig("window_length must be at least 2".into()));
            }
        }
        if let Some(h) = self.half_life {
            if h.is_nan() || h <= 0.0 {
                return Err(StatsError::InvalidConfig("half_life must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn window_for(&self, periods: usize) -> usize {
        self.window_length.unwrap_or_else(|| (periods / 2).max(2))
    }

    pub fn half_life_for(&self, periods: usize, window: usize) -> f64 {
        self.half_life
            .unwrap_or_else(|| ((periods.saturating_sub(window)) as f64 / 2.0).max(1.0))
    }
}

/// Per-period expected returns and covariance for a ticker list.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedStats {
    tickers: Vec<String>,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl ExpectedStats {
    pub fn new(tickers: Vec<String>, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, StatsError> {
        let n = tickers.len();
        if n == 0 || mean.len() != n || covariance.nrows() != n || covariance.ncols() != n {
            return Err(StatsError::Invalid(format!(
                "{} tickers, mean of length {}, {}x{} covariance",
                n,
                mean.len(),
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(StatsError::Invalid("non-finite entry".into()));
        }
        for i in 0..n {
            if covariance[(i, i)] < 0.0 {
                return Err(StatsError::Invalid(format!("negative variance for {}", tickers[i])));
            }
            for j in (i + 1)..n {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(StatsError::Invalid("covariance not symmetric".into()));
                }
            }
        }
        let min_eig = min_eigenvalue(&covariance);
        if min_eig < -PSD_TOL {
            return Err(StatsError::Invalid(format!("covariance has eigenvalue {min_eig:e}")));
        }
        Ok(Self {
            tickers,
            mean,
            covariance,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn volatilities(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_assets(), (0..self.n_assets()).map(|i| self.covariance[(i, i)].sqrt()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.covariance)
    }

    /// True when the smallest eigenvalue is below `1e-12 * trace / N`.
    pub fn is_singular(&self) -> bool {
        let scale = self.covariance.trace() / self.n_assets() as f64;
        self.min_eigenvalue() < 1e-12 * scale
    }

    /// `covariance + eps * I` with `eps = 1e-8 * trace / N`.
    pub fn ridge_repaired(&self) -> Self {
        let n = self.n_assets();
        let eps = RIDGE_SCALE * self.covariance.trace() / n as f64;
        Self {
            tickers: self.tickers.clone(),
            mean: self.mean.clone(),
            covariance: &self.covariance + DMatrix::identity(n, n) * eps,
        }
    }

    /// Same statistics with assets reordered by `perm` (`new[i] = old[perm[i]]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_assets();
        Self {
            tickers: perm.iter().map(|&p| self.tickers[p].clone()).collect(),
            mean: DVector::from_fn(n, |i, _| self.mean[perm[i]]),
            covariance: DMatrix::from_fn(n, n, |i, j| self.covariance[(perm[i], perm[j])]),
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().symmetric_eigenvalues().min()
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    m.clone().symmetric_eigenvalues().max()
}

/// Column means.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let k = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.iter().sum::<f64>() / k))
}

/// Sample covariance with the `k - 1` denominator. Exactly symmetric.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = x.shape();
    let mean = column_means(x);
    let denom = (k as f64 - 1.0).max(1.0);
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..k).map(|t| (x[(t, i)] - mean[i]) * (x[(t, j)] - mean[j])).sum();
            cov[(i, j)] = s / denom;
            cov[(j, i)] = s / denom;
        }
    }
    cov
}

/// Clips negative eigenvalues to zero and symmetrizes. Returns `None` when
/// the matrix is already PSD up to rounding.
pub fn repair_psd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.eigenvalues.min() >= -1e-13 * max_abs {
        return None;
    }
    let clipped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    let rebuilt = &eig.eigenvectors * clipped * eig.eigenvectors.transpose();
    let mut out = (&rebuilt + rebuilt.transpose()) * 0.5;
    for i in 0..n {
        out[(i, i)] = out[(i, i)].max(0.0);
    }
    Some(out)
}

fn finish(tickers: &[String], mean: DVector<f64>, cov: DMatrix<f64>) -> Result<ExpectedStats, StatsError> {
    let cov = repair_psd(&cov).unwrap_or(cov);
    ExpectedStats::new(tickers.to_vec(), mean, cov)
}

/// Mean and sample covariance over every period.
pub fn estimate_full(returns: &ReturnsTable) -> Result<ExpectedStats, StatsError> {
    if returns.n_periods() < 2 {
        return Err(StatsError::InsufficientSamples {
            needed: 2,
            found: returns.n_periods(),
        });
    }
    let x = returns.values();
    finish(returns.tickers(), column_means(x), sample_covariance(x))
}

/// Uniform start offsets in `0..=periods - window`.
pub fn sample_window_starts(periods: usize, window: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut g = rng::stream(seed, &[0x5749_4e44]);
    let offsets = periods - window + 1;
    (0..count).map(|_| rng::index_below(&mut g, offsets)).collect()
}

struct WindowStats {
    start: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn window_stats(returns: &ReturnsTable, config: &EstimatorConfig) -> Result<(usize, Vec<WindowStats>), StatsError> {
    config.validate()?;
    let periods = returns.n_periods();
    let window = config.window_for(periods);
    if window < 2 {
        return Err(StatsError::InvalidConfig("window_length must be at least 2".into()));
    }
    if window > periods {
        return Err(StatsError::WindowTooLong {
            window,
            available: periods,
        });
    }
    let starts = sample_window_starts(periods, window, config.sample_count, config.seed);
    let x = returns.values();
    let stats = starts
        .par_iter()
        .map(|&start| {
            let w = x.rows(start, window).into_owned();
            WindowStats {
                start,
                mean: column_means(&w),
                cov: sample_covariance(&w),
            }
        })
        .collect();
    Ok((window, stats))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Median of window statistics, elementwise.
pub fn estimate_random(returns: &ReturnsTable, config: &EstimatorConfig) -> Result<ExpectedStats, StatsError> {
    let (_, windows) = window_stats(returns, config)?;
    let n = returns.n_assets();
    let mut buf = vec![0.0; windows.len()];
    let mean = DVector::from_fn(n, |i, _| {
        for (b, w) in buf.iter_mut().zip(&windows) {
            *b = w.mean[i];
        }
        median(&mut buf)
    });
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            for (b, w) in buf.iter_mut().zip(&windows) {
                *b = w.cov[(i, j)];
            }
            let m = median(&mut buf);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    finish(returns.tickers(), mean, cov)
}

/// Recency-weighted average of window statistics.
pub fn estimate_weighted(returns: &ReturnsTable, config: &EstimatorConfig) -> Result<ExpectedStats, StatsError> {
    let (window, windows) = window_stats(returns, config)?;
    let periods = returns.n_periods();
    let half_life = config.half_life_for(periods, window);
    let weights: Vec<f64> = windows
        .iter()
        .map(|w| recency_weight((periods - 1) - (w.start + window - 1), half_life))
        .collect();
    let n = returns.n_assets();
    let mut buf = vec![0.0; windows.len()];
    let mean = DVector::from_fn(n, |i, _| {
        for (b, w) in buf.iter_mut().zip(&windows) {
            *b = w.mean[i];
        }
        weighted_average(&buf, &weights)
    });
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            for (b, w) in buf.iter_mut().zip(&windows) {
                *b = w.cov[(i, j)];
            }
            let m = weighted_average(&buf, &weights);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    finish(returns.tickers(), mean, cov)
}

/// `2^(-age / half_life)`.
pub fn recency_weight(age: usize, half_life: f64) -> f64 {
    (-(age as f64) / half_life).exp2()
}

/// `sum_k w_k x_k / sum_k w_k`, accumulated in index order.
pub fn weighted_average(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total
}

/// Dispatches on `config.mode`.
pub fn estimate(returns: &ReturnsTable, config: &EstimatorConfig) -> Result<ExpectedStats, StatsError> {
    match config.mode {
        EstimatorMode::Full => estimate_full(returns),
        EstimatorMode::Random => estimate_random(returns, config),
        EstimatorMode::Weighted => estimate_weighted(returns, config),
    }
}
