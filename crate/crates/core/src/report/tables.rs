use chrono::NaiveDate;

use super::{csv_failure, csv_records, num, parse_f64, CsvOut, ReportError};
use crate::backtest::BacktestReport;
use crate::flags::{self, Flag};
use crate::optimizer::FrontierPoint;
use crate::portfolio::{period_to_annual_return, period_to_annual_volatility, PortfolioResult};
use crate::stats::ExpectedStats;

/// Cell text for an undefined Sharpe ratio.
pub const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), num)
}

fn parse_opt(line: u64, cell: &str) -> Result<Option<f64>, ReportError> {
    if cell == UNDEFINED {
        Ok(None)
    } else {
        parse_f64(line, cell).map(Some)
    }
}

fn parse_flags(line: u64, cell: &str) -> Result<Vec<Flag>, ReportError> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';')
        .map(|f| f.parse::<Flag>().map_err(|_| csv_failure(line, format!("unknown flag `{f}`"))))
        .collect()
}

fn header<'a>(records: &'a [(u64, Vec<String>)], want: &[&str]) -> Result<&'a [(u64, Vec<String>)], ReportError> {
    let ((_, h), rest) = records.split_first().ok_or(ReportError::Empty)?;
    if h.len() < want.len() || !h.iter().zip(want).all(|(a, b)| a == b) {
        return Err(csv_failure(1, format!("expected header starting {}", want.join(","))));
    }
    Ok(rest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsRow {
    pub date: NaiveDate,
    pub daily_return: f64,
    pub cumulative_return: f64,
}

/// `date,daily_return,cumulative_return` for objective `k` of `report`.
pub fn returns_csv(report: &BacktestReport, k: usize) -> String {
    let o = &report.objectives[k];
    let mut w = CsvOut::new();
    w.row(["date", "daily_return", "cumulative_return"]);
    for ((d, r), c) in report.dates.iter().zip(&o.daily_returns).zip(&o.cumulative_returns) {
        w.row([d.format("%Y-%m-%d").to_string(), num(*r), num(*c)]);
    }
    w.finish()
}

pub fn parse_returns_csv(text: &str) -> Result<Vec<ReturnsRow>, ReportError> {
    let records = csv_records(text)?;
    header(&records, &["date", "daily_return", "cumulative_return"])?
        .iter()
        .map(|(line, r)| {
            let date = NaiveDate::parse_from_str(&r[0], "%Y-%m-%d")
                .map_err(|_| csv_failure(*line, format!("bad date `{}`", r[0])))?;
            Ok(ReturnsRow {
                date,
                daily_return: parse_f64(*line, &r[1])?,
                cumulative_return: parse_f64(*line, &r[2])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub objective: String,
    pub annualized_return: f64,
    pub annualized_volatility: f64,
    pub sharpe: Option<f64>,
    pub windows: usize,
    pub flags: Vec<Flag>,
}

/// `objective,annualized_return,annualized_volatility,sharpe,windows,flags`.
pub fn summary_csv(report: &BacktestReport) -> String {
    let mut w = CsvOut::new();
    w.row(["objective", "annualized_return", "annualized_volatility", "sharpe", "windows", "flags"]);
    for o in &report.objectives {
        w.row([
            o.label.clone(),
            num(o.annualized_return),
            num(o.annualized_volatility),
            opt(o.sharpe),
            o.windows.to_string(),
            flags::join(&o.flags),
        ]);
    }
    w.finish()
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, ReportError> {
    let records = csv_records(text)?;
    header(
        &records,
        &["objective", "annualized_return", "annualized_volatility", "sharpe", "windows", "flags"],
    )?
    .iter()
    .map(|(line, r)| {
        Ok(SummaryRow {
            objective: r[0].clone(),
            annualized_return: parse_f64(*line, &r[1])?,
            annualized_volatility: parse_f64(*line, &r[2])?,
            sharpe: parse_opt(*line, &r[3])?,
            windows: r[4]
                .parse()
                .map_err(|_| csv_failure(*line, format!("bad window count `{}`", r[4])))?,
            flags: parse_flags(*line, &r[5])?,
        })
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsHistory {
    pub tickers: Vec<String>,
    /// `(window, objective, weights)` rows.
    pub rows: Vec<(usize, String, Vec<f64>)>,
}

/// `window,objective,<ticker...>`, one row per window and objective.
pub fn weights_csv(report: &BacktestReport) -> String {
    let mut w = CsvOut::new();
    w.row(["window", "objective"].into_iter().chain(report.tickers.iter().map(String::as_str)));
    for win in &report.windows {
        for o in &win.objectives {
            w.row(
                [win.window_index.to_string(), o.label.clone()]
                    .into_iter()
                    .chain(o.weights().values().iter().map(|v| num(*v))),
            );
        }
    }
    w.finish()
}

pub fn parse_weights_csv(text: &str) -> Result<WeightsHistory, ReportError> {
    let records = csv_records(text)?;
    let rows = header(&records, &["window", "objective"])?;
    let tickers = records[0].1[2..].to_vec();
    let rows = rows
        .iter()
        .map(|(line, r)| {
            let window = r[0]
                .parse()
                .map_err(|_| csv_failure(*line, format!("bad window index `{}`", r[0])))?;
            let weights = r[2..].iter().map(|c| parse_f64(*line, c)).collect::<Result<Vec<_>, _>>()?;
            Ok((window, r[1].clone(), weights))
        })
        .collect::<Result<Vec<_>, ReportError>>()?;
    Ok(WeightsHistory { tickers, rows })
}

/// Per-asset expected statistics, per period and annualized.
pub fn expected_stats_csv(stats: &ExpectedStats) -> String {
    let mut w = CsvOut::new();
    w.row(["ticker", "mean_return", "volatility", "annualized_return", "annualized_volatility"]);
    let vols = stats.volatilities();
    for (i, t) in stats.tickers().iter().enumerate() {
        let (m, v) = (stats.mean()[i], vols[i]);
        w.row([
            t.clone(),
            num(m),
            num(v),
            num(period_to_annual_return(m)),
            num(period_to_annual_volatility(v)),
        ]);
    }
    w.finish()
}

/// One row per labelled portfolio: per-period and annualized statistics,
/// flags and weights.
pub fn portfolios_csv(tickers: &[String], results: &[(String, PortfolioResult)], annual_risk_free: f64) -> String {
    let mut w = CsvOut::new();
    let head = [
        "objective",
        "expected_return",
        "volatility",
        "sharpe",
        "annualized_return",
        "annualized_volatility",
        "annualized_sharpe",
        "flags",
    ];
    w.row(head.into_iter().chain(tickers.iter().map(String::as_str)));
    for (label, r) in results {
        let (ar, av) = (
            period_to_annual_return(r.expected_return),
            period_to_annual_volatility(r.volatility),
        );
        let annual_sharpe = (av > 0.0).then(|| (ar - annual_risk_free) / av);
        w.row(
            [
                label.clone(),
                num(r.expected_return),
                num(r.volatility),
                opt(r.sharpe),
                num(ar),
                num(av),
                opt(annual_sharpe),
                flags::join(&r.flags),
            ]
            .into_iter()
            .chain(r.weights.values().iter().map(|v| num(*v))),
        );
    }
    w.finish()
}

/// Frontier table: target, achieved return and volatility, flags, weights.
pub fn frontier_csv(tickers: &[String], points: &[FrontierPoint]) -> String {
    let mut w = CsvOut::new();
    let head = ["point", "target_return", "expected_return", "volatility", "flags"];
    w.row(head.into_iter().chain(tickers.iter().map(String::as_str)));
    for (i, p) in points.iter().enumerate() {
        w.row(
            [
                i.to_string(),
                num(p.target_return),
                num(p.expected_return),
                num(p.volatility),
                flags::join(&p.flags),
            ]
            .into_iter()
            .chain(p.weights.values().iter().map(|v| num(*v))),
        );
    }
    w.finish()
}

/// `key,value` disclosure of the conventions behind a command's numbers.
pub fn conventions_csv(entries: &[(&str, String)]) -> String {
    let mut w = CsvOut::new();
    w.row(["key", "value"]);
    for (k, v) in entries {
        w.row([k.to_string(), v.clone()]);
    }
    w.finish()
}
