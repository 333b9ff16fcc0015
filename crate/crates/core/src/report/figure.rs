use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{csv_failure, csv_records, num, parse_f64, CsvOut, ReportError};

/// Linear threshold of the symmetric-log axis used by distribution figures.
pub const SYMLOG_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    CumulativeReturns,
    ReturnDistribution,
    CorrelationHeatmap,
    FrontierScatter,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] = [
        FigureKind::CumulativeReturns,
        FigureKind::ReturnDistribution,
        FigureKind::CorrelationHeatmap,
        FigureKind::FrontierScatter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::CumulativeReturns => "cumulative-returns",
            FigureKind::ReturnDistribution => "return-distribution",
            FigureKind::CorrelationHeatmap => "correlation-heatmap",
            FigureKind::FrontierScatter => "frontier-scatter",
        }
    }
}

impl FromStr for FigureKind {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FigureKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ReportError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub title: String,
    /// One label per series (lines, boxes) or per matrix row. Scatter points
    /// carry their own labels.
    pub series_labels: Vec<String>,
    pub x_label: String,
    pub y_label: String,
}

impl FigureSpec {
    pub fn new(kind: FigureKind, title: impl Into<String>, series_labels: Vec<String>) -> Self {
        let (x, y) = match kind {
            FigureKind::CumulativeReturns => ("date", "cumulative return"),
            FigureKind::ReturnDistribution => ("series", "daily return (symlog)"),
            FigureKind::CorrelationHeatmap => ("", ""),
            FigureKind::FrontierScatter => ("volatility", "expected return"),
        };
        Self {
            kind,
            title: title.into(),
            series_labels,
            x_label: x.to_string(),
            y_label: y.to_string(),
        }
    }
}

/// Min, nearest-rank quartiles, median and max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub label: String,
    pub volatility: f64,
    pub expected_return: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScatterData {
    pub assets: Vec<ScatterPoint>,
    pub portfolios: Vec<ScatterPoint>,
    /// `(volatility, expected_return)` in target order.
    pub frontier: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FigureData {
    /// Shared x labels and one y series per label.
    Lines { x: Vec<String>, series: Vec<Vec<f64>> },
    /// Raw samples per series; plotted as box statistics.
    Samples(Vec<Vec<f64>>),
    Boxes(Vec<BoxStats>),
    /// Square matrix, row-major.
    Matrix(Vec<Vec<f64>>),
    Scatter(ScatterData),
}

impl FigureData {
    fn name(&self) -> &'static str {
        match self {
            FigureData::Lines { .. } => "line",
            FigureData::Samples(_) => "sample",
            FigureData::Boxes(_) => "box",
            FigureData::Matrix(_) => "matrix",
            FigureData::Scatter(_) => "scatter",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Figure {
    pub svg: String,
    pub csv: String,
}

/// Nearest-rank statistics: the `p`-quantile is the `max(1, ceil(p n))`-th
/// smallest value.
pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let rank = |p: f64| {
        let r = (p * n as f64).ceil() as usize;
        v[r.clamp(1, n) - 1]
    };
    Some(BoxStats {
        min: v[0],
        q1: rank(0.25),
        median: rank(0.5),
        q3: rank(0.75),
        max: v[n - 1],
    })
}

/// `sign(v) * log10(1 + |v| / threshold)`.
pub fn symlog(v: f64) -> f64 {
    v.signum() * (1.0 + v.abs() / SYMLOG_THRESHOLD).log10()
}

/// Two-decimal cell annotation; `n/a` for `NaN`.
pub fn format_annotation(v: f64) -> String {
    if v.is_nan() {
        return "n/a".to_string();
    }
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Validates `data` against `spec` and renders it. The CSV holds exactly the
/// plotted values; [`parse_companion_csv`] reads it back.
pub fn emit_figure(spec: &FigureSpec, data: &FigureData) -> Result<Figure, ReportError> {
    let data = normalize(spec, data)?;
    let csv = companion_csv(spec, &data);
    let svg = render(spec, &data);
    Ok(Figure { svg, csv })
}

fn mismatch(kind: FigureKind, data: &FigureData) -> ReportError {
    ReportError::KindMismatch {
        kind: kind.as_str(),
        data: data.name(),
    }
}

fn check_labels(spec: &FigureSpec, n: usize) -> Result<(), ReportError> {
    if spec.series_labels.len() != n {
        return Err(ReportError::Inconsistent(format!(
            "{} labels for {} series",
            spec.series_labels.len(),
            n
        )));
    }
    Ok(())
}

fn finite(values: impl IntoIterator<Item = f64>) -> Result<(), ReportError> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(ReportError::Inconsistent("non-finite value".into()))
    }
}

fn normalize(spec: &FigureSpec, data: &FigureData) -> Result<FigureData, ReportError> {
    match (spec.kind, data) {
        (FigureKind::CumulativeReturns, FigureData::Lines { x, series }) => {
            if x.is_empty() || series.is_empty() {
                return Err(ReportError::Empty);
            }
            check_labels(spec, series.len())?;
            if let Some(s) = series.iter().find(|s| s.len() != x.len()) {
                return Err(ReportError::Inconsistent(format!(
                    "series of length {} against {} x values",
                    s.len(),
                    x.len()
                )));
            }
            finite(series.iter().flatten().copied())?;
            Ok(data.clone())
        }
        (FigureKind::ReturnDistribution, FigureData::Samples(samples)) => {
            if samples.is_empty() || samples.iter().any(Vec::is_empty) {
                return Err(ReportError::Empty);
            }
            check_labels(spec, samples.len())?;
            finite(samples.iter().flatten().copied())?;
            Ok(FigureData::Boxes(samples.iter().map(|s| box_stats(s).expect("non-empty finite")).collect()))
        }
        (FigureKind::ReturnDistribution, FigureData::Boxes(b)) => {
            if b.is_empty() {
                return Err(ReportError::Empty);
            }
            check_labels(spec, b.len())?;
            finite(b.iter().flat_map(|s| [s.min, s.q1, s.median, s.q3, s.max]))?;
            Ok(data.clone())
        }
        (FigureKind::CorrelationHeatmap, FigureData::Matrix(m)) => {
            if m.is_empty() {
                return Err(ReportError::Empty);
            }
            check_labels(spec, m.len())?;
            if m.iter().any(|r| r.len() != m.len()) {
                return Err(ReportError::Inconsistent("matrix is not square".into()));
            }
            if m.iter().flatten().any(|v| v.is_infinite()) {
                return Err(ReportError::Inconsistent("non-finite value".into()));
            }
            Ok(data.clone())
        }
        (FigureKind::FrontierScatter, FigureData::Scatter(s)) => {
            if s.assets.is_empty() && s.portfolios.is_empty() && s.frontier.is_empty() {
                return Err(ReportError::Empty);
            }
            finite(
                s.assets
                    .iter()
                    .chain(&s.portfolios)
                    .flat_map(|p| [p.volatility, p.expected_return])
                    .chain(s.frontier.iter().flat_map(|&(a, b)| [a, b])),
            )?;
            Ok(data.clone())
        }
        (kind, d) => Err(mismatch(kind, d)),
    }
}

fn companion_csv(spec: &FigureSpec, data: &FigureData) -> String {
    let mut w = CsvOut::new();
    match data {
        FigureData::Lines { x, series } => {
            w.row(std::iter::once("x").chain(spec.series_labels.iter().map(String::as_str)));
            for (i, xi) in x.iter().enumerate() {
                w.row(std::iter::once(xi.clone()).chain(series.iter().map(|s| num(s[i]))));
            }
        }
        FigureData::Boxes(b) => {
            w.row(["series", "min", "q1", "median", "q3", "max"]);
            for (label, s) in spec.series_labels.iter().zip(b) {
                w.row([label.clone(), num(s.min), num(s.q1), num(s.median), num(s.q3), num(s.max)]);
            }
        }
        FigureData::Matrix(m) => {
            w.row(std::iter::once("label").chain(spec.series_labels.iter().map(String::as_str)));
            for (label, r) in spec.series_labels.iter().zip(m) {
                w.row(std::iter::once(label.clone()).chain(r.iter().map(|v| num(*v))));
            }
        }
        FigureData::Scatter(s) => {
            w.row(["group", "label", "volatility", "expected_return"]);
            for p in &s.assets {
                w.row(["asset".into(), p.label.clone(), num(p.volatility), num(p.expected_return)]);
            }
            for p in &s.portfolios {
                w.row(["portfolio".into(), p.label.clone(), num(p.volatility), num(p.expected_return)]);
            }
            for (i, (v, r)) in s.frontier.iter().enumerate() {
                w.row(["frontier".into(), i.to_string(), num(*v), num(*r)]);
            }
        }
        FigureData::Samples(_) => unreachable!("samples are normalized to boxes"),
    }
    w.finish()
}

/// Reads a companion CSV back into series labels and plot data.
pub fn parse_companion_csv(kind: FigureKind, text: &str) -> Result<(Vec<String>, FigureData), ReportError> {
    let records = csv_records(text)?;
    let ((_, header), rows) = records.split_first().ok_or(ReportError::Empty)?;
    let expect_header = |want: &[&str]| {
        if header.iter().map(String::as_str).eq(want.iter().copied()) {
            Ok(())
        } else {
            Err(csv_failure(1, format!("expected header {}", want.join(","))))
        }
    };
    match kind {
        FigureKind::CumulativeReturns => {
            if header.first().map(String::as_str) != Some("x") {
                return Err(csv_failure(1, "first header cell must be `x`"));
            }
            let labels = header[1..].to_vec();
            let mut x = Vec::with_capacity(rows.len());
            let mut series = vec![Vec::with_capacity(rows.len()); labels.len()];
            for (line, r) in rows {
                x.push(r[0].clone());
                for (k, cell) in r[1..].iter().enumerate() {
                    series[k].push(parse_f64(*line, cell)?);
                }
            }
            Ok((labels, FigureData::Lines { x, series }))
        }
        FigureKind::ReturnDistribution => {
            expect_header(&["series", "min", "q1", "median", "q3", "max"])?;
            let mut labels = Vec::new();
            let mut boxes = Vec::new();
            for (line, r) in rows {
                let v = r[1..].iter().map(|c| parse_f64(*line, c)).collect::<Result<Vec<_>, _>>()?;
                labels.push(r[0].clone());
                boxes.push(BoxStats {
                    min: v[0],
                    q1: v[1],
                    median: v[2],
                    q3: v[3],
                    max: v[4],
                });
            }
            Ok((labels, FigureData::Boxes(boxes)))
        }
        FigureKind::CorrelationHeatmap => {
            if header.first().map(String::as_str) != Some("label") {
                return Err(csv_failure(1, "first header cell must be `label`"));
            }
            let labels = header[1..].to_vec();
            let mut m = Vec::new();
            for (line, r) in rows {
                m.push(r[1..].iter().map(|c| parse_f64(*line, c)).collect::<Result<Vec<_>, _>>()?);
            }
            Ok((labels, FigureData::Matrix(m)))
        }
        FigureKind::FrontierScatter => {
            expect_header(&["group", "label", "volatility", "expected_return"])?;
            let mut s = ScatterData::default();
            for (line, r) in rows {
                let vol = parse_f64(*line, &r[2])?;
                let ret = parse_f64(*line, &r[3])?;
                let point = ScatterPoint {
                    label: r[1].clone(),
                    volatility: vol,
                    expected_return: ret,
                };
                match r[0].as_str() {
                    "asset" => s.assets.push(point),
                    "portfolio" => s.portfolios.push(point),
                    "frontier" => s.frontier.push((vol, ret)),
                    g => return Err(csv_failure(*line, format!("unknown group `{g}`"))),
                }
            }
            Ok((Vec::new(), FigureData::Scatter(s)))
        }
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c if (c as u32) < 0x20 && c != '\t' && c != '\n' && c != '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

fn c(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Maps a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Scale {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi > lo {
            let pad = (hi - lo) * 0.05;
            (lo - pad, hi + pad)
        } else {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
            (lo - pad, hi + pad)
        };
        Self { lo, hi, from, to }
    }

    fn at(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self, count: usize) -> Vec<f64> {
        (0..count)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (count - 1) as f64)
            .collect()
    }
}

fn bounds(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn tick_label(v: f64, span: f64) -> String {
    let digits = if span > 0.0 {
        (2 - span.log10().floor() as i32).clamp(0, 8) as usize
    } else {
        4
    };
    let s = format!("{v:.digits$}");
    if s.starts_with('-') && s[1..].chars().all(|ch| ch == '0' || ch == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

struct Svg(String);

impl Svg {
    fn new(spec: &FigureSpec) -> Self {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">",
            w = WIDTH,
            h = HEIGHT
        );
        let _ = writeln!(s, "<title>{}</title>", escape(&spec.title));
        let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>");
        let _ = writeln!(
            s,
            "<text class=\"title\" x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
            c((LEFT + WIDTH - RIGHT) / 2.0),
            escape(&spec.title)
        );
        Svg(s)
    }

    fn line(&mut self, class: &str, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.0,
            "<line class=\"{class}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{stroke}\"/>",
            c(x1),
            c(y1),
            c(x2),
            c(y2)
        );
    }

    fn text(&mut self, class: &str, x: f64, y: f64, anchor: &str, body: &str) {
        let _ = writeln!(
            self.0,
            "<text class=\"{class}\" x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>",
            c(x),
            c(y),
            escape(body)
        );
    }

    fn axes(&mut self, spec: &FigureSpec) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        self.0.push_str("<g class=\"axes\">\n");
        self.line("axis", x0, y1, x1, y1, "#000000");
        self.line("axis", x0, y0, x0, y1, "#000000");
        self.text("axis-label", (x0 + x1) / 2.0, HEIGHT - 12.0, "middle", &spec.x_label);
        let _ = writeln!(
            self.0,
            "<text class=\"axis-label\" x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
            c((y0 + y1) / 2.0),
            c((y0 + y1) / 2.0),
            escape(&spec.y_label)
        );
        self.0.push_str("</g>\n");
    }

    fn y_ticks(&mut self, scale: &Scale, labels: &[(f64, String)]) {
        self.0.push_str("<g class=\"y-ticks\">\n");
        for (v, label) in labels {
            let y = scale.at(*v);
            self.line("tick", LEFT - 4.0, y, LEFT, y, "#000000");
            self.text("tick-label", LEFT - 6.0, y + 4.0, "end", label);
        }
        self.0.push_str("</g>\n");
    }

    fn legend(&mut self, rows: &[(String, String)]) {
        self.0.push_str("<g class=\"legend\">\n");
        let x = WIDTH - RIGHT + 16.0;
        for (i, (label, color)) in rows.iter().enumerate() {
            let y = TOP + 16.0 + 18.0 * i as f64;
            self.0.push_str("<g class=\"legend-row\">\n");
            let _ = writeln!(
                self.0,
                "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"10\" fill=\"{color}\"/>",
                c(x),
                c(y - 9.0)
            );
            self.text("legend-label", x + 20.0, y, "start", label);
            self.0.push_str("</g>\n");
        }
        self.0.push_str("</g>\n");
    }

    fn finish(mut self) -> String {
        self.0.push_str("</svg>\n");
        self.0
    }
}

fn render(spec: &FigureSpec, data: &FigureData) -> String {
    let mut svg = Svg::new(spec);
    match data {
        FigureData::Lines { x, series } => render_lines(&mut svg, spec, x, series),
        FigureData::Boxes(b) => render_boxes(&mut svg, spec, b),
        FigureData::Matrix(m) => render_heatmap(&mut svg, spec, m),
        FigureData::Scatter(s) => render_scatter(&mut svg, spec, s),
        FigureData::Samples(_) => unreachable!("samples are normalized to boxes"),
    }
    svg.finish()
}

fn linear_ticks(scale: &Scale) -> Vec<(f64, String)> {
    let span = scale.hi - scale.lo;
    scale.ticks(5).into_iter().map(|v| (v, tick_label(v, span))).collect()
}

fn render_lines(svg: &mut Svg, spec: &FigureSpec, x: &[String], series: &[Vec<f64>]) {
    svg.axes(spec);
    let (lo, hi) = bounds(series.iter().flatten().copied());
    let ys = Scale::new(lo, hi, HEIGHT - BOTTOM, TOP);
    let n = x.len();
    let xpos = |i: usize| {
        if n == 1 {
            (LEFT + WIDTH - RIGHT) / 2.0
        } else {
            LEFT + (WIDTH - RIGHT - LEFT) * i as f64 / (n - 1) as f64
        }
    };
    svg.y_ticks(&ys, &linear_ticks(&ys));
    svg.0.push_str("<g class=\"x-ticks\">\n");
    let shown = n.min(6);
    let mut last = usize::MAX;
    for k in 0..shown {
        let i = if shown == 1 { 0 } else { k * (n - 1) / (shown - 1) };
        if i == last {
            continue;
        }
        last = i;
        let px = xpos(i);
        svg.line("tick", px, HEIGHT - BOTTOM, px, HEIGHT - BOTTOM + 4.0, "#000000");
        svg.text("tick-label", px, HEIGHT - BOTTOM + 18.0, "middle", &x[i]);
    }
    svg.0.push_str("</g>\n");
    svg.0.push_str("<g class=\"series\">\n");
    for (k, s) in series.iter().enumerate() {
        let points: Vec<String> = s.iter().enumerate().map(|(i, v)| format!("{},{}", c(xpos(i)), c(ys.at(*v)))).collect();
        let _ = writeln!(
            svg.0,
            "<polyline class=\"series-line\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            PALETTE[k % PALETTE.len()],
            points.join(" ")
        );
    }
    svg.0.push_str("</g>\n");
    let rows: Vec<(String, String)> = spec
        .series_labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.clone(), PALETTE[k % PALETTE.len()].to_string()))
        .collect();
    svg.legend(&rows);
}

fn render_boxes(svg: &mut Svg, spec: &FigureSpec, boxes: &[BoxStats]) {
    svg.axes(spec);
    let (lo, hi) = bounds(boxes.iter().flat_map(|b| [symlog(b.min), symlog(b.max)]));
    let ys = Scale::new(lo, hi, HEIGHT - BOTTOM, TOP);
    let mut ticks = vec![(0.0, "0".to_string())];
    for e in -4..=1 {
        let v = 10f64.powi(e);
        for s in [1.0, -1.0] {
            let t = symlog(s * v);
            if t >= ys.lo && t <= ys.hi {
                ticks.push((t, format!("{}1e{e}", if s < 0.0 { "-" } else { "" })));
            }
        }
    }
    ticks.sort_by(|a, b| a.0.total_cmp(&b.0));
    svg.y_ticks(&ys, &ticks);
    let slot = (WIDTH - RIGHT - LEFT) / boxes.len() as f64;
    let half = (slot * 0.3).min(30.0);
    svg.0.push_str("<g class=\"boxes\">\n");
    for (k, (b, label)) in boxes.iter().zip(&spec.series_labels).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let cx = LEFT + slot * (k as f64 + 0.5);
        let (ymin, yq1, ymed, yq3, ymax) = (ys.at(symlog(b.min)), ys.at(symlog(b.q1)), ys.at(symlog(b.median)), ys.at(symlog(b.q3)), ys.at(symlog(b.max)));
        svg.0.push_str("<g class=\"box\">\n");
        svg.line("whisker", cx, ymin, cx, yq1, "#000000");
        svg.line("whisker", cx, yq3, cx, ymax, "#000000");
        svg.line("cap", cx - half / 2.0, ymin, cx + half / 2.0, ymin, "#000000");
        svg.line("cap", cx - half / 2.0, ymax, cx + half / 2.0, ymax, "#000000");
        let _ = writeln!(
            svg.0,
            "<rect class=\"quartiles\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" fill-opacity=\"0.5\" stroke=\"#000000\"/>",
            c(cx - half),
            c(yq3),
            c(2.0 * half),
            c(yq1 - yq3)
        );
        svg.line("median", cx - half, ymed, cx + half, ymed, "#000000");
        svg.text("tick-label", cx, HEIGHT - BOTTOM + 18.0, "middle", label);
        svg.0.push_str("</g>\n");
    }
    svg.0.push_str("</g>\n");
    let rows: Vec<(String, String)> = spec
        .series_labels
        .iter()
        .enumerate()
        .map(|(k, l)| (l.clone(), PALETTE[k % PALETTE.len()].to_string()))
        .collect();
    svg.legend(&rows);
}

/// Diverging blue-white-red colour for `v` in `[-1, 1]`; grey for `NaN`.
fn heat_color(v: f64) -> String {
    if v.is_nan() {
        return "#cccccc".into();
    }
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn render_heatmap(svg: &mut Svg, spec: &FigureSpec, m: &[Vec<f64>]) {
    let n = m.len();
    let size = ((WIDTH - RIGHT - LEFT).min(HEIGHT - TOP - BOTTOM)) / n as f64;
    svg.0.push_str("<g class=\"heatmap\">\n");
    for (i, row) in m.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let x = LEFT + size * j as f64;
            let y = TOP + size * i as f64;
            let _ = writeln!(
                svg.0,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\"/>",
                c(x),
                c(y),
                c(size),
                c(size),
                heat_color(*v)
            );
            svg.text("annotation", x + size / 2.0, y + size / 2.0 + 4.0, "middle", &format_annotation(*v));
        }
    }
    svg.0.push_str("</g>\n<g class=\"axis-labels\">\n");
    for (k, label) in spec.series_labels.iter().enumerate() {
        let mid = size * (k as f64 + 0.5);
        svg.text("row-label", LEFT - 6.0, TOP + mid + 4.0, "end", label);
        svg.text("col-label", LEFT + mid, TOP + size * n as f64 + 16.0, "middle", label);
    }
    svg.0.push_str("</g>\n");
    svg.legend(&[
        ("-1.00".to_string(), heat_color(-1.0)),
        ("0.00".to_string(), heat_color(0.0)),
        ("1.00".to_string(), heat_color(1.0)),
        ("n/a".to_string(), heat_color(f64::NAN)),
    ]);
}

fn render_scatter(svg: &mut Svg, spec: &FigureSpec, s: &ScatterData) {
    svg.axes(spec);
    let all = || {
        s.assets
            .iter()
            .chain(&s.portfolios)
            .map(|p| (p.volatility, p.expected_return))
            .chain(s.frontier.iter().copied())
    };
    let (xlo, xhi) = bounds(all().map(|p| p.0));
    let (ylo, yhi) = bounds(all().map(|p| p.1));
    let xs = Scale::new(xlo, xhi, LEFT, WIDTH - RIGHT);
    let ys = Scale::new(ylo, yhi, HEIGHT - BOTTOM, TOP);
    svg.y_ticks(&ys, &linear_ticks(&ys));
    svg.0.push_str("<g class=\"x-ticks\">\n");
    for (v, label) in linear_ticks(&xs) {
        let px = xs.at(v);
        svg.line("tick", px, HEIGHT - BOTTOM, px, HEIGHT - BOTTOM + 4.0, "#000000");
        svg.text("tick-label", px, HEIGHT - BOTTOM + 18.0, "middle", &label);
    }
    svg.0.push_str("</g>\n");
    let mut rows = Vec::new();
    if !s.frontier.is_empty() {
        let points: Vec<String> = s.frontier.iter().map(|(v, r)| format!("{},{}", c(xs.at(*v)), c(ys.at(*r)))).collect();
        let _ = writeln!(
            svg.0,
            "<polyline class=\"frontier\" fill=\"none\" stroke=\"#000000\" stroke-dasharray=\"4 3\" points=\"{}\"/>",
            points.join(" ")
        );
        rows.push(("efficient frontier".to_string(), "#000000".to_string()));
    }
    let groups = [("asset", &s.assets, PALETTE[0]), ("portfolio", &s.portfolios, PALETTE[3])];
    for (class, points, color) in groups {
        if points.is_empty() {
            continue;
        }
        let _ = writeln!(svg.0, "<g class=\"{class}s\">");
        for p in points.iter() {
            let (px, py) = (xs.at(p.volatility), ys.at(p.expected_return));
            let _ = writeln!(
                svg.0,
                "<circle class=\"{class}\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"{color}\"/>",
                c(px),
                c(py)
            );
            svg.text("point-label", px + 6.0, py - 6.0, "start", &p.label);
        }
        svg.0.push_str("</g>\n");
        rows.push((format!("{class}s"), color.to_string()));
    }
    svg.legend(&rows);
}
