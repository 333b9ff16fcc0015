//! Historical price ingestion and per-asset return summaries.
//!
//! Prices come from a wide CSV file (`date,<ticker1>,<ticker2>,...`) where an
//! empty cell means the ticker has no observation that day. Requested tickers
//! are aligned by inner join on dates: a row survives only when every
//! requested ticker has a price on it.

mod cache;
mod csv_format;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DMatrix;
use thiserror::Error;

pub use cache::{PriceCache, CACHE_DIR_ENV, CACHE_SCHEMA_VERSION};
pub use csv_format::{parse_price_csv, PriceFile};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}", path = path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("ticker `{0}` not found in price file")]
    UnknownTicker(String),
    #[error("duplicate ticker `{0}` requested")]
    DuplicateTicker(String),
    #[error("only {found} aligned dates; at least 2 are required")]
    InsufficientDates { found: usize },
    #[error("invalid price series `{ticker}`: {message}")]
    InvalidSeries { ticker: String, message: String },
    #[error("asset `{0}` has zero return variance")]
    DegenerateAsset(String),
    #[error("price table shape mismatch: {0}")]
    Shape(String),
    #[error("price cache at {path}: {message}", path = path.display())]
    Cache { path: PathBuf, message: String },
}

/// Observations of one ticker, dates strictly increasing, prices positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self, DataError> {
        let ticker = ticker.into();
        let invalid = |message: String| DataError::InvalidSeries {
            ticker: ticker.clone(),
            message,
        };
        if observations.len() < 2 {
            return Err(invalid(format!("{} observations, need at least 2", observations.len())));
        }
        for pair in observations.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(invalid(format!("dates not strictly increasing at {}", pair[1].0)));
            }
        }
        if let Some((d, p)) = observations.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(invalid(format!("non-positive price {p} on {d}")));
        }
        Ok(Self { ticker, observations })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }
}

/// Date-aligned `T x N` price matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    prices: DMatrix<f64>,
}

impl PriceTable {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, prices: DMatrix<f64>) -> Result<Self, DataError> {
        if tickers.is_empty() {
            return Err(DataError::Shape("no tickers".into()));
        }
        if prices.ncols() != tickers.len() || prices.nrows() != dates.len() {
            return Err(DataError::Shape(format!(
                "{}x{} matrix for {} dates and {} tickers",
                prices.nrows(),
                prices.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        if dates.len() < 2 {
            return Err(DataError::InsufficientDates { found: dates.len() });
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::Shape("dates not strictly increasing".into()));
        }
        for (j, ticker) in tickers.iter().enumerate() {
            if let Some(p) = prices.column(j).iter().find(|p| !(p.is_finite() && **p > 0.0)) {
                return Err(DataError::InvalidSeries {
                    ticker: ticker.clone(),
                    message: format!("non-positive price {p}"),
                });
            }
        }
        Ok(Self { tickers, dates, prices })
    }

    /// Inner-join alignment of several series on their common dates.
    pub fn align(series: &[PriceSeries]) -> Result<Self, DataError> {
        let mut seen = std::collections::HashSet::new();
        for s in series {
            if !seen.insert(s.ticker()) {
                return Err(DataError::DuplicateTicker(s.ticker().to_string()));
            }
        }
        let mut common: Option<BTreeMap<NaiveDate, Vec<f64>>> = None;
        for s in series {
            common = Some(match common {
                None => s.observations.iter().map(|&(d, p)| (d, vec![p])).collect(),
                Some(mut acc) => {
                    let lookup: BTreeMap<NaiveDate, f64> = s.observations.iter().copied().collect();
                    acc.retain(|d, _| lookup.contains_key(d));
                    for (d, row) in acc.iter_mut() {
                        row.push(lookup[d]);
                    }
                    acc
                }
            });
        }
        let common = common.ok_or_else(|| DataError::Shape("no tickers".into()))?;
        let n = series.len();
        let dates: Vec<NaiveDate> = common.keys().copied().collect();
        if dates.len() < 2 {
            return Err(DataError::InsufficientDates { found: dates.len() });
        }
        let prices = DMatrix::from_fn(dates.len(), n, |t, j| common[&dates[t]][j]);
        let tickers = series.iter().map(|s| s.ticker.clone()).collect();
        Self::new(tickers, dates, prices)
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Rows with `start <= date <= end`; `None` leaves that side open.
    pub fn restrict_dates(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Result<Self, DataError> {
        let keep: Vec<usize> = self
            .dates
            .iter()
            .enumerate()
            .filter(|(_, d)| start.is_none_or(|s| **d >= s) && end.is_none_or(|e| **d <= e))
            .map(|(i, _)| i)
            .collect();
        let dates = keep.iter().map(|&i| self.dates[i]).collect();
        let prices = self.prices.select_rows(keep.iter());
        Self::new(self.tickers.clone(), dates, prices)
    }

    /// Sub-table with the given tickers in the given order. Dates are not
    /// re-aligned since every row is already complete.
    pub fn select(&self, tickers: &[String]) -> Result<Self, DataError> {
        let idx = tickers
            .iter()
            .map(|t| {
                self.tickers
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| DataError::UnknownTicker(t.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tickers.to_vec(), self.dates.clone(), self.prices.select_columns(idx.iter()))
    }
}

/// `(T-1) x N` simple returns; each return carries the later date of its pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsTable {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    returns: DMatrix<f64>,
}

impl ReturnsTable {
    pub fn new(tickers: Vec<String>, dates: Vec<NaiveDate>, returns: DMatrix<f64>) -> Result<Self, DataError> {
        if returns.ncols() != tickers.len() || returns.nrows() != dates.len() {
            return Err(DataError::Shape(format!(
                "{}x{} returns for {} dates and {} tickers",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                tickers.len()
            )));
        }
        Ok(Self { tickers, dates, returns })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_periods(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Rows `range` as a new table.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let rows = range.len();
        Self {
            tickers: self.tickers.clone(),
            dates: self.dates[range.clone()].to_vec(),
            returns: self.returns.rows(range.start, rows).into_owned(),
        }
    }
}

/// Reads `path` and aligns the requested tickers. With a cache, the parsed
/// table is stored under a key derived from the file contents and ticker list.
pub fn load_prices(path: &Path, tickers: &[String], cache: Option<&PriceCache>) -> Result<PriceTable, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match cache {
        Some(cache) => cache.get_or_parse(&bytes, tickers, || prices_from_bytes(&bytes, tickers)),
        None => prices_from_bytes(&bytes, tickers),
    }
}

/// Parses CSV bytes and aligns the requested tickers.
pub fn prices_from_bytes(bytes: &[u8], tickers: &[String]) -> Result<PriceTable, DataError> {
    let file = parse_price_csv(bytes)?;
    let mut series = Vec::with_capacity(tickers.len());
    for t in tickers {
        let obs = file.observations(t).ok_or_else(|| DataError::UnknownTicker(t.clone()))?;
        if obs.len() < 2 {
            return Err(DataError::InsufficientDates { found: obs.len() });
        }
        series.push(PriceSeries::new(t.clone(), obs)?);
    }
    PriceTable::align(&series)
}

/// Serializes a table as `date,<ticker...>` CSV with shortest round-trip decimals.
pub fn write_price_csv(table: &PriceTable) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let header = std::iter::once("date").chain(table.tickers.iter().map(String::as_str));
    w.write_record(header).expect("in-memory write");
    for (t, d) in table.dates.iter().enumerate() {
        let row = std::iter::once(d.format("%Y-%m-%d").to_string())
            .chain((0..table.n_assets()).map(|j| format!("{}", table.prices[(t, j)])));
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii csv")
}

/// `(p[t+1] - p[t]) / p[t]` per column.
pub fn simple_returns(prices: &PriceTable) -> ReturnsTable {
    let p = &prices.prices;
    let periods = p.nrows() - 1;
    let returns = DMatrix::from_fn(periods, p.ncols(), |t, j| (p[(t + 1, j)] - p[(t, j)]) / p[(t, j)]);
    ReturnsTable {
        tickers: prices.tickers.clone(),
        dates: prices.dates[1..].to_vec(),
        returns,
    }
}

/// Compounded returns `prod_{s<=t}(1 + r_s) - 1` per column.
pub fn cumulative_returns(returns: &ReturnsTable) -> ReturnsTable {
    let mut out = returns.returns.clone();
    for mut col in out.column_iter_mut() {
        let mut growth = 1.0;
        for v in col.iter_mut() {
            growth *= 1.0 + *v;
            *v = growth - 1.0;
        }
    }
    ReturnsTable {
        tickers: returns.tickers.clone(),
        dates: returns.dates.clone(),
        returns: out,
    }
}

/// Compounds a single return stream.
pub fn compound(series: &[f64]) -> Vec<f64> {
    let mut growth = 1.0;
    series
        .iter()
        .map(|r| {
            growth *= 1.0 + r;
            growth - 1.0
        })
        .collect()
}

/// Pearson correlation of the return columns. Unit diagonal, symmetric,
/// entries clamped to `[-1, 1]`.
pub fn correlation_matrix(returns: &ReturnsTable) -> Result<DMatrix<f64>, DataError> {
    if returns.n_periods() < 2 {
        return Err(DataError::InsufficientDates {
            found: returns.n_periods() + 1,
        });
    }
    pearson(&returns.returns).map_err(|j| DataError::DegenerateAsset(returns.tickers[j].clone()))
}

/// Column-wise Pearson correlation; `Err(j)` names the first zero-variance column.
pub(crate) fn pearson(x: &DMatrix<f64>) -> Result<DMatrix<f64>, usize> {
    let cov = crate::stats::sample_covariance(x);
    let n = x.ncols();
    let sd: Vec<f64> = (0..n).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    if let Some(j) = sd.iter().position(|&s| s == 0.0) {
        return Err(j);
    }
    let mut corr = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let c = (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            corr[(i, j)] = c;
            corr[(j, i)] = c;
        }
    }
    Ok(corr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn table(cols: &[&[f64]]) -> PriceTable {
        let t = cols[0].len();
        let tickers = (0..cols.len()).map(|i| format!("A{i}")).collect();
        let dates = (0..t).map(|k| d("2020-01-01") + chrono::Days::new(k as u64)).collect();
        PriceTable::new(tickers, dates, DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r])).unwrap()
    }

    fn returns_of(cols: &[&[f64]]) -> ReturnsTable {
        let t = cols[0].len();
        let tickers = (0..cols.len()).map(|i| format!("A{i}")).collect();
        let dates = (0..t).map(|k| d("2020-01-02") + chrono::Days::new(k as u64)).collect();
        ReturnsTable::new(tickers, dates, DMatrix::from_fn(t, cols.len(), |r, c| cols[c][r])).unwrap()
    }

    fn tickers(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn full_overlap_keeps_all_dates() {
        let csv = "date,IVV,AGG\n2020-01-01,300,110\n2020-01-02,301,110.5\n2020-01-03,299,111\n";
        let t = prices_from_bytes(csv.as_bytes(), &tickers(&["IVV", "AGG"])).unwrap();
        assert_eq!((t.n_dates(), t.n_assets()), (3, 2));
        assert_eq!(t.tickers(), &["IVV".to_string(), "AGG".to_string()]);
    }

    #[test]
    fn mismatched_calendars_inner_join() {
        let csv = "date,A,B\n2020-01-01,1,\n2020-01-02,2,5\n2020-01-03,3,6\n2020-01-04,,7\n";
        let t = prices_from_bytes(csv.as_bytes(), &tickers(&["A", "B"])).unwrap();
        assert_eq!(t.dates(), &[d("2020-01-02"), d("2020-01-03")]);
        assert_eq!(t.prices()[(0, 1)], 5.0);
        // A alone keeps its three dates
        let a = prices_from_bytes(csv.as_bytes(), &tickers(&["A"])).unwrap();
        assert_eq!(a.n_dates(), 3);
    }

    #[test]
    fn unknown_ticker_is_rejected() {
        let csv = "date,A\n2020-01-01,1\n2020-01-02,2\n";
        let err = prices_from_bytes(csv.as_bytes(), &tickers(&["XXX"])).unwrap_err();
        assert!(matches!(err, DataError::UnknownTicker(t) if t == "XXX"));
    }

    #[test]
    fn too_few_aligned_dates() {
        let csv = "date,A,B\n2020-01-01,1,\n2020-01-02,2,5\n2020-01-03,,6\n";
        let err = prices_from_bytes(csv.as_bytes(), &tickers(&["A", "B"])).unwrap_err();
        assert!(matches!(err, DataError::InsufficientDates { found: 1 }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_prices(Path::new("/nonexistent/prices.csv"), &tickers(&["A"]), None).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }

    #[test]
    fn simple_return_examples() {
        let r = simple_returns(&table(&[&[100.0, 110.0], &[7.0, 7.0], &[100.0, 50.0]]));
        assert!((r.values()[(0, 0)] - 0.10).abs() < 1e-15);
        assert_eq!(r.values()[(0, 1)], 0.0);
        assert_eq!(r.values()[(0, 2)], -0.5);
    }

    #[test]
    fn returns_take_later_date() {
        let p = table(&[&[1.0, 2.0, 3.0]]);
        let r = simple_returns(&p);
        assert_eq!(r.dates(), &p.dates()[1..]);
    }

    #[test]
    fn cumulative_examples() {
        let c = cumulative_returns(&returns_of(&[&[0.10, 0.10], &[0.0, 0.0], &[0.5, -0.5]]));
        assert!((c.values()[(1, 0)] - 0.21).abs() < 1e-15);
        assert_eq!(c.values()[(1, 1)], 0.0);
        assert_eq!(c.values()[(0, 2)], 0.5);
        assert_eq!(c.values()[(1, 2)], -0.25);
    }

    #[test]
    fn correlation_examples() {
        let a = [0.01, -0.02, 0.03, 0.005];
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let c = correlation_matrix(&returns_of(&[&a, &a, &neg])).unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 1e-14);
        assert!((c[(0, 2)] + 1.0).abs() < 1e-14);
        assert_eq!(c[(0, 0)], 1.0);

        // Pearson by hand: x=[1,1,-1,-1], y=[1,-1,1,-1], means 0,
        // sum(x*y) = 1 - 1 - 1 + 1 = 0, so the covariance and correlation vanish.
        let c = correlation_matrix(&returns_of(&[&[1.0, 1.0, -1.0, -1.0], &[1.0, -1.0, 1.0, -1.0]])).unwrap();
        assert_eq!(c[(0, 1)], 0.0);
    }

    #[test]
    fn zero_variance_column_names_ticker() {
        let err = correlation_matrix(&returns_of(&[&[0.01, 0.02, 0.0], &[0.01, 0.01, 0.01]])).unwrap_err();
        assert!(matches!(err, DataError::DegenerateAsset(t) if t == "A1"));
    }

    #[test]
    fn restrict_and_select() {
        let p = table(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        let r = p.restrict_dates(Some(d("2020-01-02")), Some(d("2020-01-03"))).unwrap();
        assert_eq!(r.n_dates(), 2);
        assert_eq!(r.prices()[(0, 0)], 2.0);
        let s = p.select(&tickers(&["A1"])).unwrap();
        assert_eq!(s.prices()[(3, 0)], 8.0);
    }

    #[test]
    fn series_invariants() {
        assert!(PriceSeries::new("A", vec![(d("2020-01-01"), 1.0)]).is_err());
        assert!(PriceSeries::new("A", vec![(d("2020-01-02"), 1.0), (d("2020-01-01"), 1.0)]).is_err());
        assert!(PriceSeries::new("A", vec![(d("2020-01-01"), 1.0), (d("2020-01-02"), 0.0)]).is_err());
    }
}
