//! Report artifacts: figure emission and tabular CSV outputs.

mod figure;
mod tables;

use thiserror::Error;

pub use figure::{
    box_stats, emit_figure, format_annotation, parse_companion_csv, symlog, BoxStats, Figure, FigureData, FigureKind,
    FigureSpec, ScatterData, ScatterPoint, SYMLOG_THRESHOLD,
};
pub use tables::{
    conventions_csv, expected_stats_csv, frontier_csv, parse_returns_csv, parse_summary_csv, parse_weights_csv,
    portfolios_csv, returns_csv, summary_csv, weights_csv, ReturnsRow, SummaryRow, WeightsHistory, UNDEFINED,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("figure data is empty")]
    Empty,
    #[error("inconsistent figure data: {0}")]
    Inconsistent(String),
    #[error("{kind} figures cannot plot {data} data")]
    KindMismatch { kind: &'static str, data: &'static str },
    #[error("unknown figure kind `{0}`")]
    UnknownKind(String),
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
}

pub(crate) fn csv_failure(line: u64, message: impl Into<String>) -> ReportError {
    ReportError::Csv {
        line,
        message: message.into(),
    }
}

/// A `\n`-terminated CSV writer over an in-memory buffer.
pub(crate) struct CsvOut(csv::Writer<Vec<u8>>);

impl CsvOut {
    pub(crate) fn new() -> Self {
        Self(
            csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new()),
        )
    }

    pub(crate) fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.0.write_record(cells).expect("in-memory write");
    }

    pub(crate) fn finish(self) -> String {
        String::from_utf8(self.0.into_inner().expect("in-memory write")).expect("utf-8 cells")
    }
}

/// Reads all records of `text`, header included, with 1-based line numbers.
pub(crate) fn csv_records(text: &str) -> Result<Vec<(u64, Vec<String>)>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_failure(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

pub(crate) fn parse_f64(line: u64, cell: &str) -> Result<f64, ReportError> {
    cell.parse::<f64>()
        .map_err(|_| csv_failure(line, format!("`{cell}` is not a number")))
}

/// Shortest decimal that parses back to the same `f64`.
pub(crate) fn num(v: f64) -> String {
    format!("{v}")
}
