//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::backtest::{run_backtest, BacktestReport};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::market_data::{correlation_matrix, cumulative_returns, load_prices, simple_returns, PriceCache, PriceTable};
use crate::portfolio::{
    build_portfolio, efficient_frontier, period_to_annual_return, period_to_annual_volatility, PERIODS_PER_YEAR,
};
use crate::report::{
    conventions_csv, emit_figure, expected_stats_csv, frontier_csv, portfolios_csv, returns_csv, summary_csv,
    weights_csv, FigureData, FigureKind, FigureSpec, ScatterData, ScatterPoint, SYMLOG_THRESHOLD,
};
use crate::stats::{estimate, ExpectedStats};

#[derive(Debug, Parser)]
#[command(name = "portopt", version, about = "Portfolio construction, QUBO selection and rolling backtests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    Stats,
    Optimize,
    Frontier,
    Backtest,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asset statistics, cumulative returns, distributions and correlations.
    Stats(CommonArgs),
    /// One portfolio per configured objective on the full sample.
    Optimize(CommonArgs),
    /// Efficient frontier with asset and portfolio points.
    Frontier(CommonArgs),
    /// Rolling-window backtest of every configured objective.
    Backtest(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Top-level seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub verbose: bool,
}

impl Command {
    pub fn split(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Command::Stats(a) => (CommandKind::Stats, a),
            Command::Optimize(a) => (CommandKind::Optimize, a),
            Command::Frontier(a) => (CommandKind::Frontier, a),
            Command::Backtest(a) => (CommandKind::Backtest, a),
        }
    }
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Stats => "stats",
            CommandKind::Optimize => "optimize",
            CommandKind::Frontier => "frontier",
            CommandKind::Backtest => "backtest",
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { crate::error::EXIT_CONFIG } else { 0 };
        }
    };
    let (kind, common) = cli.command.split();
    let level = if common.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = RunConfig::load(&common.config)
        .map_err(Error::from)
        .and_then(|config| run(kind, &config, common.out.as_deref(), common.seed));
    match result {
        Ok(paths) => {
            for p in paths {
                info!("wrote {}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs `kind` and writes its artifacts, returning the written paths.
pub fn run(kind: CommandKind, config: &RunConfig, out: Option<&Path>, seed: Option<u64>) -> Result<Vec<PathBuf>> {
    let seed = seed.unwrap_or(config.seed);
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let cache = PriceCache::from_env().or_else(|| config.cache_dir.as_ref().map(PriceCache::new));
    let prices = load_prices(&config.data, &config.tickers, cache.as_ref())?;
    info!(
        "loaded {} dates x {} tickers from {}",
        prices.n_dates(),
        prices.n_assets(),
        config.data.display()
    );
    let mut out = Output::new(&out_dir, kind)?;
    match kind {
        CommandKind::Stats => stats_command(config, seed, &prices, &mut out)?,
        CommandKind::Optimize => optimize_command(config, seed, &prices, &mut out)?,
        CommandKind::Frontier => frontier_command(config, seed, &prices, &mut out)?,
        CommandKind::Backtest => backtest_command(config, seed, &prices, &mut out)?,
    }
    out.write("conventions", "csv", &conventions_csv(&conventions(config, seed)))?;
    Ok(out.written)
}

struct Output {
    dir: PathBuf,
    command: CommandKind,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path, command: CommandKind) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            written: Vec::new(),
        })
    }

    fn write(&mut self, artifact: &str, ext: &str, body: &str) -> Result<()> {
        let path = self.dir.join(format!("{}_{}.{}", self.command.as_str(), artifact, ext));
        std::fs::write(&path, body).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        self.written.push(path);
        Ok(())
    }

    fn figure(&mut self, artifact: &str, spec: &FigureSpec, data: &FigureData) -> Result<()> {
        let f = emit_figure(spec, data)?;
        self.write(artifact, "svg", &f.svg)?;
        self.write(artifact, "csv", &f.csv)
    }
}

/// File-name-safe form of an objective label.
pub fn artifact_name(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn sample(config: &RunConfig, prices: &PriceTable) -> Result<PriceTable> {
    Ok(prices.restrict_dates(config.backtest.start_date, config.backtest.end_date)?)
}

fn full_sample_stats(config: &RunConfig, seed: u64, prices: &PriceTable) -> Result<ExpectedStats> {
    let returns = simple_returns(prices);
    Ok(estimate(&returns, &config.estimator_config(seed))?)
}

fn stats_command(config: &RunConfig, seed: u64, prices: &PriceTable, out: &mut Output) -> Result<()> {
    let prices = sample(config, prices)?;
    let returns = simple_returns(&prices);
    let stats = full_sample_stats(config, seed, &prices)?;
    out.write("expected", "csv", &expected_stats_csv(&stats))?;
    let tickers = returns.tickers().to_vec();
    let columns = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> { m.column_iter().map(|c| c.iter().copied().collect()).collect() };
    if config.figures.cumulative_returns {
        let cum = cumulative_returns(&returns);
        let spec = FigureSpec::new(FigureKind::CumulativeReturns, "Cumulative Returns of Assets", tickers.clone());
        let data = FigureData::Lines {
            x: dates_text(returns.dates()),
            series: columns(cum.values()),
        };
        out.figure("cumulative_returns", &spec, &data)?;
    }
    if config.figures.return_distribution {
        let spec = FigureSpec::new(FigureKind::ReturnDistribution, "Distribution of Daily Asset Returns", tickers.clone());
        out.figure("return_distribution", &spec, &FigureData::Samples(columns(returns.values())))?;
    }
    if config.figures.correlation_heatmap {
        let corr = correlation_matrix(&returns)?;
        let spec = FigureSpec::new(FigureKind::CorrelationHeatmap, "Correlation of Daily Asset Returns", tickers);
        out.figure("correlation_heatmap", &spec, &FigureData::Matrix(rows(&corr)))?;
    }
    Ok(())
}

fn optimize_command(config: &RunConfig, seed: u64, prices: &PriceTable, out: &mut Output) -> Result<()> {
    let prices = sample(config, prices)?;
    let stats = full_sample_stats(config, seed, &prices)?;
    let results = optimize_all(config, seed, &stats)?;
    out.write("portfolios", "csv", &portfolios_csv(stats.tickers(), &results, config.risk_free_rate))
}

fn optimize_all(config: &RunConfig, seed: u64, stats: &ExpectedStats) -> Result<Vec<(String, crate::portfolio::PortfolioResult)>> {
    let rf = crate::portfolio::annual_to_period_return(config.risk_free_rate);
    let schedule = config.schedule(seed);
    config
        .objective_specs()
        .into_iter()
        .map(|spec| {
            info!("optimizing {}", spec.label);
            let r = build_portfolio(&spec.objective, stats, &config.bounds, &config.solver, &schedule, rf)?;
            Ok((spec.label, r))
        })
        .collect()
}

/// Frontier points with consecutive duplicates removed, annualized.
fn frontier_scatter(config: &RunConfig, stats: &ExpectedStats, portfolios: Vec<ScatterPoint>) -> Result<(Vec<crate::optimizer::FrontierPoint>, ScatterData)> {
    let points = efficient_frontier(stats, &config.bounds, &config.solver, config.solver.frontier_points.max(2))?;
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for p in &points {
        let xy = (period_to_annual_volatility(p.volatility), period_to_annual_return(p.expected_return));
        if frontier.last() != Some(&xy) {
            frontier.push(xy);
        }
    }
    let vols = stats.volatilities();
    let assets = stats
        .tickers()
        .iter()
        .enumerate()
        .map(|(i, t)| ScatterPoint {
            label: t.clone(),
            volatility: period_to_annual_volatility(vols[i]),
            expected_return: period_to_annual_return(stats.mean()[i]),
        })
        .collect();
    Ok((
        points,
        ScatterData {
            assets,
            portfolios,
            frontier,
        },
    ))
}

fn frontier_command(config: &RunConfig, seed: u64, prices: &PriceTable, out: &mut Output) -> Result<()> {
    let prices = sample(config, prices)?;
    let stats = full_sample_stats(config, seed, &prices)?;
    let portfolios = optimize_all(config, seed, &stats)?
        .into_iter()
        .map(|(label, r)| ScatterPoint {
            label,
            volatility: period_to_annual_volatility(r.volatility),
            expected_return: period_to_annual_return(r.expected_return),
        })
        .collect();
    let (points, scatter) = frontier_scatter(config, &stats, portfolios)?;
    out.write("table", "csv", &frontier_csv(stats.tickers(), &points))?;
    if config.figures.frontier_scatter {
        let spec = FigureSpec::new(FigureKind::FrontierScatter, "Expected Returns vs. Volatility", Vec::new());
        out.figure("scatter", &spec, &FigureData::Scatter(scatter))?;
    }
    Ok(())
}

fn backtest_command(config: &RunConfig, seed: u64, prices: &PriceTable, out: &mut Output) -> Result<()> {
    let report = run_backtest(prices, &config.backtest_config(seed))?;
    info!("backtest finished: {} windows", report.windows.len());
    write_backtest(config, seed, prices, &report, out)
}

fn write_backtest(config: &RunConfig, seed: u64, prices: &PriceTable, report: &BacktestReport, out: &mut Output) -> Result<()> {
    for (k, o) in report.objectives.iter().enumerate() {
        out.write(&format!("returns_{}", artifact_name(&o.label)), "csv", &returns_csv(report, k))?;
    }
    out.write("summary", "csv", &summary_csv(report))?;
    out.write("weights", "csv", &weights_csv(report))?;
    let labels: Vec<String> = report.objectives.iter().map(|o| o.label.clone()).collect();
    if config.figures.cumulative_returns {
        let spec = FigureSpec::new(FigureKind::CumulativeReturns, "Cumulative Portfolio Returns", labels.clone());
        let data = FigureData::Lines {
            x: dates_text(&report.dates),
            series: report.objectives.iter().map(|o| o.cumulative_returns.clone()).collect(),
        };
        out.figure("cumulative_returns", &spec, &data)?;
    }
    if config.figures.return_distribution {
        let spec = FigureSpec::new(FigureKind::ReturnDistribution, "Distribution of Daily Portfolio Returns", labels.clone());
        let data = FigureData::Samples(report.objectives.iter().map(|o| o.daily_returns.clone()).collect());
        out.figure("return_distribution", &spec, &data)?;
    }
    if config.figures.correlation_heatmap {
        let spec = FigureSpec::new(FigureKind::CorrelationHeatmap, "Correlation of Daily Portfolio Returns", labels);
        out.figure("correlation_heatmap", &spec, &FigureData::Matrix(rows(&report.correlation)))?;
    }
    if config.figures.frontier_scatter {
        let prices = sample(config, prices)?;
        let stats = full_sample_stats(config, seed, &prices)?;
        let portfolios = report
            .objectives
            .iter()
            .map(|o| ScatterPoint {
                label: o.label.clone(),
                volatility: o.annualized_volatility,
                expected_return: o.annualized_return,
            })
            .collect();
        let (_, scatter) = frontier_scatter(config, &stats, portfolios)?;
        let spec = FigureSpec::new(FigureKind::FrontierScatter, "Expected Returns vs. Volatility", Vec::new());
        out.figure("frontier_scatter", &spec, &FigureData::Scatter(scatter))?;
    }
    Ok(())
}

fn dates_text(dates: &[chrono::NaiveDate]) -> Vec<String> {
    dates.iter().map(|d| d.format("%Y-%m-%d").to_string()).collect()
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn conventions(config: &RunConfig, seed: u64) -> Vec<(&'static str, String)> {
    vec![
        ("periods_per_year", format!("{PERIODS_PER_YEAR}")),
        ("returns", "simple returns (p[t+1] - p[t]) / p[t] on inner-joined dates".into()),
        ("annualized_return", "mean per-period return x 252".into()),
        ("annualized_volatility", "per-period standard deviation x sqrt(252)".into()),
        ("annual_targets", "MVP target / 252; MRP target / sqrt(252)".into()),
        ("risk_free_rate", format!("{} annual", config.risk_free_rate)),
        ("estimator", format!("{:?}", config.estimator.mode).to_lowercase()),
        ("covariance_repair", "ridge eps*I with eps = 1e-8 * trace / N when singular".into()),
        ("bmop_solver", "simulated annealing in place of quantum annealing hardware".into()),
        ("holding", "weights fixed within each test window and applied per period without drift".into()),
        ("quartiles", "nearest rank".into()),
        ("distribution_axis", format!("symlog, linear threshold {SYMLOG_THRESHOLD:e}")),
        ("seed", seed.to_string()),
    ]
}
