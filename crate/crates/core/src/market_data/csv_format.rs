use std::collections::HashSet;

use chrono::NaiveDate;

use super::DataError;

/// A parsed wide price file: one optional price per (date row, ticker column).
#[derive(Debug, Clone, PartialEq)]
pub struct PriceFile {
    tickers: Vec<String>,
    dates: Vec<NaiveDate>,
    cells: Vec<Vec<Option<f64>>>,
}

impl PriceFile {
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Dated observations of `ticker`, skipping empty cells.
    pub fn observations(&self, ticker: &str) -> Option<Vec<(NaiveDate, f64)>> {
        let col = self.tickers.iter().position(|t| t == ticker)?;
        Some(
            self.dates
                .iter()
                .zip(&self.cells)
                .filter_map(|(d, row)| row[col].map(|p| (*d, p)))
                .collect(),
        )
    }
}

fn malformed(line: u64, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses `date,<ticker...>` CSV bytes. Dates must be ISO `YYYY-MM-DD` and
/// strictly increasing; non-empty cells must be finite positive decimals.
pub fn parse_price_csv(bytes: &[u8]) -> Result<PriceFile, DataError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(bytes);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    let mut fields = header.iter();
    match fields.next() {
        Some("date") => {}
        other => return Err(malformed(1, format!("first header cell must be `date`, found {other:?}"))),
    }
    let tickers: Vec<String> = fields.map(str::to_string).collect();
    if tickers.is_empty() {
        return Err(malformed(1, "header names no tickers"));
    }
    let mut seen = HashSet::new();
    for t in &tickers {
        if t.is_empty() {
            return Err(malformed(1, "empty ticker name in header"));
        }
        if !seen.insert(t.as_str()) {
            return Err(malformed(1, format!("ticker `{t}` repeated in header")));
        }
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let mut it = record.iter();
        let raw_date = it.next().unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .ok()
            .filter(|_| is_iso_date(raw_date))
            .ok_or_else(|| malformed(line, format!("invalid date `{raw_date}`")))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(malformed(line, format!("date {date} does not follow {prev}")));
            }
        }
        let row = it
            .enumerate()
            .map(|(j, cell)| parse_price(cell).map_err(|m| malformed(line, format!("{}: {m}", tickers[j]))))
            .collect::<Result<Vec<_>, _>>()?;
        dates.push(date);
        cells.push(row);
    }
    Ok(PriceFile { tickers, dates, cells })
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && b.iter().enumerate().all(|(i, c)| i == 4 || i == 7 || c.is_ascii_digit())
}

fn parse_price(cell: &str) -> Result<Option<f64>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    let looks_decimal = cell
        .bytes()
        .all(|c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E'));
    if !looks_decimal {
        return Err(format!("`{cell}` is not a decimal literal"));
    }
    let v: f64 = cell.parse().map_err(|_| format!("`{cell}` is not a decimal literal"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("price {cell} must be positive"));
    }
    Ok(Some(v))
}

fn csv_error(e: csv::Error, fallback_line: u64) -> DataError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    malformed(line, message)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(err: DataError) -> u64 {
        match err {
            DataError::Malformed { line, .. } => line,
            other => panic!("expected malformed, got {other}"),
        }
    }

    #[test]
    fn parses_crlf_and_empty_cells() {
        let f = parse_price_csv(b"date,A,B\r\n2020-01-01,1.5,\r\n2020-01-02,2,3\r\n").unwrap();
        assert_eq!(f.tickers(), &["A".to_string(), "B".to_string()]);
        assert_eq!(f.observations("B").unwrap().len(), 1);
        assert_eq!(f.observations("A").unwrap()[0].1, 1.5);
    }

    #[test]
    fn malformed_rows_report_line() {
        assert_eq!(line_of(parse_price_csv(b"date,A\n2020-01-01,1\n2020-01-02,abc\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_price_csv(b"date,A\n2020-01-01,1,2\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_price_csv(b"date,A\n2020/01/01,1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_price_csv(b"date,A\n2020-01-02,1\n2020-01-01,1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse_price_csv(b"date,A\n2020-01-01,-4\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_price_csv(b"day,A\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_price_csv(b"date,A,A\n").unwrap_err()), 1);
    }

    #[test]
    fn rejects_non_decimal_spellings() {
        assert!(parse_price_csv(b"date,A\n2020-01-01,inf\n").is_err());
        assert!(parse_price_csv(b"date,A\n2020-01-01,NaN\n").is_err());
        assert!(parse_price_csv(b"date,A\n2020-01-01,0x10\n").is_err());
    }

    #[test]
    fn accepts_bom() {
        let f = parse_price_csv(b"\xEF\xBB\xBFdate,A\n2020-01-01,1\n").unwrap();
        assert_eq!(f.dates().len(), 1);
    }
}
