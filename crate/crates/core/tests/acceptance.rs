//! Acceptance criteria. Runs each criterion independently and prints one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use portopt::backtest::{plan_windows, run_backtest, BacktestConfig, BacktestReport, ObjectiveSpec};
use portopt::cli::{run, CommandKind};
use portopt::config::RunConfig;
use portopt::market_data::{load_prices, simple_returns, PriceTable};
use portopt::optimizer::{
    solve_mop, solve_mrp, solve_msrp, solve_mvp, SolverSettings, WeightBounds, Weights, BOUND_TOL, SUM_TOL,
};
use portopt::portfolio::{annual_to_period_return, annual_to_period_volatility, efficient_frontier, PortfolioObjective};
use portopt::qubo::{anneal, build_bmop, exhaustive_min, AnnealSchedule, BinarySelection, QuboModel};
use portopt::report::{parse_returns_csv, parse_summary_csv, parse_weights_csv, returns_csv, summary_csv, weights_csv};
use portopt::rng::{stream, StreamRng};
use portopt::stats::{EstimatorMode, ExpectedStats};
use portopt::synthetic::{fixture_assets, weekdays};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i}")).collect()
}

/// Mean in [-0.01, 0.03], covariance `A A' + 1e-3 I` with `A` uniform in [-0.2, 0.2].
fn random_stats(g: &mut StreamRng, n: usize) -> ExpectedStats {
    let a = DMatrix::from_fn(n, n, |_, _| g.random_range(-0.2..0.2));
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 1e-3;
    let cov = (&cov + cov.transpose()) * 0.5;
    let mean = DVector::from_fn(n, |_, _| g.random_range(-0.01..0.03));
    ExpectedStats::new(tickers(n), mean, cov).unwrap()
}

fn variance(s: &ExpectedStats, w: &DVector<f64>) -> f64 {
    w.dot(&(s.covariance() * w))
}

// ---------------------------------------------------------------------------
// Oracles for N = 3 on the unit simplex.

/// All simplex points with coordinates on a `1/steps` lattice.
fn simplex_grid(steps: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let k = steps - i - j;
            out.push(DVector::from_vec(vec![
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                k as f64 / steps as f64,
            ]));
        }
    }
    out
}

/// Subsets of `0..n` as index lists, including the full set.
fn supports(n: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n)).map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect()).collect()
}

fn embed(n: usize, support: &[usize], v: &DVector<f64>) -> DVector<f64> {
    let mut w = DVector::zeros(n);
    for (k, &i) in support.iter().enumerate() {
        w[i] = v[k];
    }
    w
}

fn sub(s: &ExpectedStats, support: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let r = DVector::from_iterator(support.len(), support.iter().map(|&i| s.mean()[i]));
    let c = DMatrix::from_fn(support.len(), support.len(), |a, b| s.covariance()[(support[a], support[b])]);
    (r, c)
}

/// Solves `min w'Cw - lam r'w` subject to `A w = b` on a support via the KKT system.
fn equality_qp(c: &DMatrix<f64>, r: &DVector<f64>, lam: f64, rows: &[DVector<f64>], rhs: &[f64]) -> Option<DVector<f64>> {
    let k = c.nrows();
    let m = rows.len();
    let mut kkt = DMatrix::zeros(k + m, k + m);
    let mut b = DVector::zeros(k + m);
    kkt.view_mut((0, 0), (k, k)).copy_from(&(c * 2.0));
    for (a, row) in rows.iter().enumerate() {
        for i in 0..k {
            kkt[(k + a, i)] = row[i];
            kkt[(i, k + a)] = row[i];
        }
        b[k + a] = rhs[a];
    }
    for i in 0..k {
        b[i] = lam * r[i];
    }
    let sol = kkt.lu().solve(&b)?;
    Some(sol.rows(0, k).into_owned())
}

const FEAS: f64 = 1e-12;

/// Exact MVP: minimum variance with return at least `target`.
fn exact_mvp(s: &ExpectedStats, target: f64) -> Option<f64> {
    let n = s.n_assets();
    let mut best: Option<f64> = None;
    for sup in supports(n) {
        let (r, c) = sub(s, &sup);
        let ones = DVector::from_element(sup.len(), 1.0);
        let mut cands = vec![equality_qp(&c, &r, 0.0, std::slice::from_ref(&ones), &[1.0])];
        if sup.len() >= 2 {
            cands.push(equality_qp(&c, &r, 0.0, &[ones.clone(), r.clone()], &[1.0, target]));
        }
        for v in cands.into_iter().flatten() {
            let w = embed(n, &sup, &v);
            if w.iter().all(|x| *x >= -FEAS) && s.mean().dot(&w) >= target - FEAS {
                let val = variance(s, &w);
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
    }
    best
}

/// Exact MOP: minimum of `w'Sw - lam w'r`.
fn exact_mop(s: &ExpectedStats, lam: f64) -> f64 {
    let n = s.n_assets();
    let mut best = f64::INFINITY;
    for sup in supports(n) {
        let (r, c) = sub(s, &sup);
        let ones = DVector::from_element(sup.len(), 1.0);
        if let Some(v) = equality_qp(&c, &r, lam, &[ones], &[1.0]) {
            let w = embed(n, &sup, &v);
            if w.iter().all(|x| *x >= -FEAS) {
                best = best.min(variance(s, &w) - lam * s.mean().dot(&w));
            }
        }
    }
    best
}

/// Exact MRP: maximum return with variance at most `v2`.
fn exact_mrp(s: &ExpectedStats, v2: f64) -> Option<f64> {
    let n = s.n_assets();
    let mut best: Option<f64> = None;
    let mut consider = |w: DVector<f64>| {
        if w.iter().all(|x| *x >= -FEAS) && variance(s, &w) <= v2 * (1.0 + 1e-12) {
            let val = s.mean().dot(&w);
            best = Some(best.map_or(val, |b: f64| b.max(val)));
        }
    };
    for sup in supports(n) {
        let (r, c) = sub(s, &sup);
        if sup.len() == 1 {
            consider(embed(n, &sup, &DVector::from_element(1, 1.0)));
            continue;
        }
        let inv = match c.clone().try_inverse() {
            Some(m) => m,
            None => continue,
        };
        let ones = DVector::from_element(sup.len(), 1.0);
        let a = ones.dot(&(&inv * &ones));
        let b = ones.dot(&(&inv * &r));
        let cc = r.dot(&(&inv * &r));
        let spread = cc - b * b / a;
        if spread <= 0.0 || v2 < 1.0 / a {
            continue;
        }
        let k = ((v2 - 1.0 / a) / spread).sqrt();
        let wg = &inv * &ones / a;
        let z = &inv * (&r - &ones * (b / a));
        consider(embed(n, &sup, &(wg + z * k)));
    }
    best
}

/// Exact maximum Sharpe ratio over the simplex.
fn exact_msrp(s: &ExpectedStats, rf: f64) -> f64 {
    let n = s.n_assets();
    let sharpe = |w: &DVector<f64>| (s.mean().dot(w) - rf) / variance(s, w).sqrt();
    let mut best = f64::NEG_INFINITY;
    for sup in supports(n) {
        let (r, c) = sub(s, &sup);
        let excess = r.add_scalar(-rf);
        if let Some(v) = c.lu().solve(&excess) {
            let total = v.sum();
            if total > 0.0 {
                let w = embed(n, &sup, &(v / total));
                if w.iter().all(|x| *x >= -FEAS) {
                    best = best.max(sharpe(&w));
                }
            }
        }
        if sup.len() == 1 {
            best = best.max(sharpe(&embed(n, &sup, &DVector::from_element(1, 1.0))));
        }
    }
    best
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let grid = simplex_grid(200);
    let bounds = WeightBounds::default();
    let settings = SolverSettings::default();
    let mut g = stream(1, &[1]);
    let mut worst = [0.0f64; 4];
    for inst in 0..100 {
        let s = random_stats(&mut g, 3);
        let m = s.mean();
        let vols: Vec<f64> = (0..3).map(|i| s.covariance()[(i, i)].sqrt()).collect();
        let target = m.min() + g.random_range(0.0..1.0) * (m.max() - m.min());
        let gmv_var = exact_mvp(&s, f64::NEG_INFINITY).unwrap();
        let vmax = vols.iter().cloned().fold(0.0, f64::max);
        let vol_target = gmv_var.sqrt() + g.random_range(0.05..1.0) * (vmax - gmv_var.sqrt());
        let lam = g.random_range(0.0..3.0);

        // MVP
        let w = solve_mvp(&s, target, &bounds, &settings).map_err(|e| e.to_string())?.weights;
        let wv = w.values();
        let solver = variance(&s, wv);
        ensure(m.dot(wv) >= target - 1e-9, || format!("instance {inst}: MVP return below target"))?;
        let grid_best = grid
            .iter()
            .filter(|p| m.dot(p) >= target)
            .map(|p| variance(&s, p))
            .fold(f64::INFINITY, f64::min);
        let exact = exact_mvp(&s, target).unwrap();
        ensure(solver <= grid_best + 1e-6, || format!("instance {inst}: MVP {solver} worse than grid {grid_best}"))?;
        ensure((solver - exact).abs() <= 1e-6, || format!("instance {inst}: MVP {solver} vs exact {exact}"))?;
        worst[0] = worst[0].max((solver - exact).abs());

        // MRP
        let w = solve_mrp(&s, vol_target, &bounds, &settings).map_err(|e| e.to_string())?.weights;
        let wv = w.values();
        let solver = m.dot(wv);
        ensure(variance(&s, wv).sqrt() <= vol_target + 1e-9, || format!("instance {inst}: MRP volatility above target"))?;
        let v2 = vol_target * vol_target;
        let grid_best = grid
            .iter()
            .filter(|p| variance(&s, p) <= v2)
            .map(|p| m.dot(p))
            .fold(f64::NEG_INFINITY, f64::max);
        let exact = exact_mrp(&s, v2).unwrap();
        ensure(solver >= grid_best - 1e-6, || format!("instance {inst}: MRP {solver} worse than grid {grid_best}"))?;
        ensure((solver - exact).abs() <= 1e-6, || format!("instance {inst}: MRP {solver} vs exact {exact}"))?;
        worst[1] = worst[1].max((solver - exact).abs());

        // MOP
        let w = solve_mop(&s, lam, &bounds, &settings).map_err(|e| e.to_string())?.weights;
        let f = |p: &DVector<f64>| variance(&s, p) - lam * m.dot(p);
        let solver = f(w.values());
        let grid_best = grid.iter().map(f).fold(f64::INFINITY, f64::min);
        let exact = exact_mop(&s, lam);
        ensure(solver <= grid_best + 1e-6, || format!("instance {inst}: MOP {solver} worse than grid {grid_best}"))?;
        ensure((solver - exact).abs() <= 1e-6, || format!("instance {inst}: MOP {solver} vs exact {exact}"))?;
        worst[2] = worst[2].max((solver - exact).abs());

        // MSRP
        let w = solve_msrp(&s, 0.0, &bounds, &settings).map_err(|e| e.to_string())?.weights;
        let sh = |p: &DVector<f64>| m.dot(p) / variance(&s, p).sqrt();
        let solver = sh(w.values());
        let grid_best = grid.iter().map(sh).fold(f64::NEG_INFINITY, f64::max);
        let exact = exact_msrp(&s, 0.0);
        ensure(solver >= grid_best - 1e-4, || format!("instance {inst}: MSRP {solver} worse than grid {grid_best}"))?;
        ensure((solver - exact).abs() <= 1e-4, || format!("instance {inst}: MSRP {solver} vs exact {exact}"))?;
        worst[3] = worst[3].max((solver - exact).abs());
    }
    let elapsed = start.elapsed();
    ensure(elapsed <= Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100 instances; max gap to exact optimum MVP {:.1e}, MRP {:.1e}, MOP {:.1e}, MSRP Sharpe {:.1e}; {:.1?}",
        worst[0], worst[1], worst[2], worst[3], elapsed
    ))
}

fn check_weights(w: &Weights, b: &WeightBounds) -> Result<(), String> {
    let v = w.values();
    ensure((v.sum() - 1.0).abs() <= SUM_TOL, || format!("sum {}", v.sum()))?;
    ensure(v.iter().all(|x| *x >= b.lower - BOUND_TOL && *x <= b.upper + BOUND_TOL), || format!("bounds violated: {v:?}"))
}

fn criterion_2() -> Outcome {
    let b = WeightBounds::new(0.02, 0.98).unwrap();
    let settings = SolverSettings::default();
    let mut g = stream(2, &[2]);
    let mut solved = 0;
    for inst in 0..1000 {
        let n = g.random_range(2..=10usize);
        let s = random_stats(&mut g, n);
        let m = s.mean();
        let target = m.min() + g.random_range(-0.2..1.2) * (m.max() - m.min());
        let vmax = (0..n).map(|i| s.covariance()[(i, i)].sqrt()).fold(0.0, f64::max);
        let vol = g.random_range(0.05..1.2) * vmax;
        let lam = g.random_range(0.0..3.0);
        let err = |e: portopt::optimizer::SolverError| format!("instance {inst}: {e}");
        let outputs = [
            solve_mvp(&s, target, &b, &settings).map_err(err)?,
            solve_mrp(&s, vol, &b, &settings).map_err(err)?,
            solve_msrp(&s, 0.0, &b, &settings).map_err(err)?,
            solve_mop(&s, lam, &b, &settings).map_err(err)?,
        ];
        for (k, o) in outputs.iter().enumerate() {
            check_weights(&o.weights, &b).map_err(|e| format!("instance {inst} objective {k}: {e}"))?;
            solved += 1;
        }
    }
    Ok(format!("{solved} weight vectors from 1000 instances, zero violations"))
}

/// Direct double-sum BMOP objective `-lam sum r_i x_i + sum_ij sigma_ij x_i x_j`.
fn bmop_objective(s: &ExpectedStats, lam: f64, x: &[bool]) -> f64 {
    let n = x.len();
    let mut linear = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        if !x[i] {
            continue;
        }
        linear += -lam * s.mean()[i];
        for (j, &xj) in x.iter().enumerate() {
            if xj {
                quad += s.covariance()[(i, j)];
            }
        }
    }
    linear + quad
}

fn criterion_3() -> Outcome {
    let mut g = stream(3, &[3]);
    let mut worst = 0.0f64;
    let mut states = 0usize;
    for inst in 0..50 {
        let n = 1 + inst % 10;
        let s = random_stats(&mut g, n);
        let lam = g.random_range(0.0..3.0);
        let model = build_bmop(&s, lam).map_err(|e| e.to_string())?;
        for v in 0..(1u64 << n) {
            let x = BinarySelection::from_integer(v, n);
            let e = model.energy(&x).map_err(|e| e.to_string())?;
            let d = bmop_objective(&s, lam, x.bits());
            worst = worst.max((e - d).abs());
            ensure((e - d).abs() <= 1e-12, || format!("instance {inst} state {v}: {e} vs {d}"))?;
            states += 1;
        }
    }
    Ok(format!("{states} states over 50 instances, max |diff| {worst:.1e}"))
}

fn random_qubo(g: &mut StreamRng, n: usize) -> QuboModel {
    let q = DMatrix::from_fn(n, n, |i, j| if j >= i { g.random_range(-1.0..1.0) } else { 0.0 });
    QuboModel::from_upper(q).unwrap()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut g = stream(4, &[4]);
    let mut matched = 0;
    let mut worst_gap = 0.0f64;
    for inst in 0..100u64 {
        let m = random_qubo(&mut g, 16);
        let schedule = AnnealSchedule::default().with_seed(inst);
        let x = anneal(&m, &schedule).map_err(|e| e.to_string())?;
        let best = exhaustive_min(&m).map_err(|e| e.to_string())?;
        let e_min = m.energy(&best).unwrap();
        let neg = QuboModel::from_upper(-m.matrix().clone()).unwrap();
        let e_max = m.energy(&exhaustive_min(&neg).unwrap()).unwrap();
        let e = m.energy(&x).unwrap();
        let range = e_max - e_min;
        let gap = (e - e_min) / range;
        if gap <= 1e-12 {
            matched += 1;
        }
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 0.02, || format!("instance {inst}: gap {gap}"))?;
    }
    let elapsed = start.elapsed();
    ensure(matched >= 95, || format!("only {matched}/100 matched the exhaustive minimum"))?;
    ensure(elapsed <= Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{matched}/100 exact, worst relative gap {worst_gap:.2e}, {elapsed:.1?}"))
}

fn criterion_5() -> Outcome {
    let b = WeightBounds::default();
    let settings = SolverSettings::default();
    let mut g = stream(5, &[5]);
    for inst in 0..100 {
        let n = g.random_range(2..=8usize);
        let s = random_stats(&mut g, n);
        let f = efficient_frontier(&s, &b, &settings, settings.frontier_points).map_err(|e| e.to_string())?;
        for w in f.windows(2) {
            ensure(w[1].target_return >= w[0].target_return, || format!("instance {inst}: targets not sorted"))?;
            ensure(w[1].volatility >= w[0].volatility - 1e-8, || {
                format!("instance {inst}: volatility falls {} -> {}", w[0].volatility, w[1].volatility)
            })?;
        }
        for i in 0..n {
            let level = s.mean()[i];
            let sol = solve_mvp(&s, level, &b, &settings).map_err(|e| e.to_string())?;
            let frontier_vol = variance(&s, sol.weights.values()).sqrt();
            let asset_vol = s.covariance()[(i, i)].sqrt();
            ensure(asset_vol >= frontier_vol - 1e-6, || {
                format!("instance {inst}: asset {i} vol {asset_vol} left of frontier {frontier_vol}")
            })?;
        }
    }
    Ok("100 instances: monotone frontiers, no asset left of the frontier".into())
}

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_prices.csv")
}

fn fixture_tickers() -> Vec<String> {
    fixture_assets().into_iter().map(|a| a.ticker).collect()
}

fn fixture() -> PriceTable {
    load_prices(&fixture_path(), &fixture_tickers(), None).unwrap()
}

/// The illustrative scenario: R = 20%, V = 5% annual, lambda = 1, rf = 0,
/// bounds 2%/98%, 40 training and 5 testing periods.
fn scenario(seed: u64) -> BacktestConfig {
    BacktestConfig {
        objectives: vec![
            ObjectiveSpec::new("EWP", PortfolioObjective::Ewp),
            ObjectiveSpec::new("MVP", PortfolioObjective::Mvp { target_return: annual_to_period_return(0.20) }),
            ObjectiveSpec::new(
                "MRP",
                PortfolioObjective::Mrp {
                    target_volatility: annual_to_period_volatility(0.05),
                },
            ),
            ObjectiveSpec::new("MSRP", PortfolioObjective::Msrp { risk_free_rate: 0.0 }),
            ObjectiveSpec::new("BMOP", PortfolioObjective::Bmop { risk_aversion: 1.0 }),
        ],
        bounds: WeightBounds::new(0.02, 0.98).unwrap(),
        train_periods: 40,
        test_periods: 5,
        risk_free_rate: 0.0,
        seed,
        ..BacktestConfig::default()
    }
}

fn report_bytes(r: &BacktestReport) -> String {
    let mut s = summary_csv(r) + &weights_csv(r);
    for k in 0..r.objectives.len() {
        s += &returns_csv(r, k);
    }
    s
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

fn weights_bits(r: &BacktestReport, upto: usize) -> Vec<u64> {
    r.windows[..=upto]
        .iter()
        .flat_map(|w| w.objectives.iter().flat_map(|o| o.weights().values().iter().map(|v| v.to_bits())))
        .collect()
}

fn criterion_6() -> Outcome {
    let prices = fixture();
    let returns = simple_returns(&prices);
    let mut config = scenario(17);
    config.estimator.mode = EstimatorMode::Random;

    let plans = plan_windows(returns.dates(), &config).map_err(|e| e.to_string())?;
    let mut next = config.train_periods;
    for p in &plans {
        ensure(p.test.periods.start == next, || format!("window {} does not start at {next}", p.index))?;
        ensure(p.train.periods.end == p.test.periods.start, || "train/test gap".into())?;
        next = p.test.periods.end;
    }
    ensure(next == returns.n_periods(), || "test spans do not reach the end".into())?;

    let base = with_threads(8, || run_backtest(&prices, &config)).map_err(|e| e.to_string())?;
    ensure(base.dates == returns.dates()[config.train_periods..], || "report dates do not tile".into())?;
    let single = with_threads(1, || run_backtest(&prices, &config)).map_err(|e| e.to_string())?;
    let again = with_threads(8, || run_backtest(&prices, &config)).map_err(|e| e.to_string())?;
    ensure(report_bytes(&base) == report_bytes(&single), || "1 vs 8 threads differ".into())?;
    ensure(report_bytes(&base) == report_bytes(&again), || "repeat run differs".into())?;
    ensure(base == single, || "in-memory reports differ across thread counts".into())?;

    let probes = [0usize, 1, 57, 200, plans.len() - 2];
    for &k in &probes {
        // training span k uses prices 0..=train.end; perturb the next one
        let t = plans[k].train.periods.end + 1;
        let mut p = prices.prices().clone();
        p[(t, 4)] *= 1.05;
        let perturbed = PriceTable::new(prices.tickers().to_vec(), prices.dates().to_vec(), p).unwrap();
        let r = run_backtest(&perturbed, &config).map_err(|e| e.to_string())?;
        ensure(weights_bits(&r, k) == weights_bits(&base, k), || format!("window {k} weights changed"))?;
        ensure(weights_bits(&r, k + 1) != weights_bits(&base, k + 1), || format!("perturbation after window {k} had no effect"))?;
    }
    Ok(format!(
        "{} windows tile periods 40..{}; no look-ahead at {} probes; identical across 1/8 threads",
        plans.len(),
        returns.n_periods(),
        probes.len()
    ))
}

const SCENARIO_SEED: u64 = 7;

fn criterion_7(report: &BacktestReport) -> Outcome {
    let cum = |l: &str| *report.objective(l).unwrap().cumulative_returns.last().unwrap();
    let vol = |l: &str| report.objective(l).unwrap().annualized_volatility;
    let labels = ["EWP", "MVP", "MRP", "MSRP", "BMOP"];
    let summary: Vec<String> = labels.iter().map(|l| format!("{l} {:.3}/{:.4}", cum(l), vol(l))).collect();
    let detail = format!("cumulative/volatility: {}", summary.join(", "));
    for l in labels {
        ensure(l == "MRP" || cum("MRP") > cum(l), || format!("MRP not highest vs {l}; {detail}"))?;
        ensure(l == "MVP" || vol("MVP") < vol(l), || format!("MVP not least volatile vs {l}; {detail}"))?;
    }
    Ok(detail)
}

fn criterion_8(report: &BacktestReport) -> Outcome {
    for o in &report.objectives {
        let n = o.daily_returns.len() as f64;
        let mean = o.daily_returns.iter().sum::<f64>() / n;
        let var = o.daily_returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
        let ann_ret = mean * 252.0;
        let ann_vol = var.sqrt() * 252f64.sqrt();
        let sharpe = ann_ret / ann_vol;
        ensure((o.annualized_return - ann_ret).abs() <= 1e-10, || format!("{} return", o.label))?;
        ensure((o.annualized_volatility - ann_vol).abs() <= 1e-10, || format!("{} volatility", o.label))?;
        let s = o.sharpe.ok_or_else(|| format!("{} Sharpe missing", o.label))?;
        ensure((s - sharpe).abs() <= 1e-10, || format!("{} Sharpe {s} vs {sharpe}", o.label))?;
    }
    // prices doubling every period: every daily return is exactly 1
    let periods = 60;
    let dates = weekdays(chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(), periods + 1);
    let p = DMatrix::from_fn(periods + 1, 1, |t, _| 100.0 * 2f64.powi(t as i32));
    let prices = PriceTable::new(vec!["C".into()], dates, p).unwrap();
    let config = BacktestConfig {
        objectives: vec![ObjectiveSpec::new("EWP", PortfolioObjective::Ewp)],
        ..BacktestConfig::default()
    };
    let r = run_backtest(&prices, &config).map_err(|e| e.to_string())?;
    let o = &r.objectives[0];
    ensure(o.daily_returns.iter().all(|v| *v == 1.0), || "constant series not constant".into())?;
    ensure(o.annualized_volatility == 0.0 && o.sharpe.is_none(), || "constant series has a Sharpe ratio".into())?;
    let row = &parse_summary_csv(&summary_csv(&r)).map_err(|e| e.to_string())?[0];
    ensure(row.sharpe.is_none() && summary_csv(&r).contains(",undefined,"), || "undefined Sharpe not reported".into())?;
    Ok(format!("{} objectives recomputed; constant series reports Sharpe as undefined", report.objectives.len()))
}

fn criterion_9(report: &BacktestReport) -> Outcome {
    // prices -> returns -> prices
    let prices = fixture();
    let returns = simple_returns(&prices);
    let p = prices.prices();
    let mut worst = 0.0f64;
    for j in 0..prices.n_assets() {
        let mut level = p[(0, j)];
        for t in 0..returns.n_periods() {
            level *= 1.0 + returns.values()[(t, j)];
            worst = worst.max(((level - p[(t + 1, j)]) / p[(t + 1, j)]).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("reconstruction error {worst}"))?;

    // report CSVs re-parse exactly
    let summary = parse_summary_csv(&summary_csv(report)).map_err(|e| e.to_string())?;
    for (row, o) in summary.iter().zip(&report.objectives) {
        ensure(
            row.objective == o.label
                && row.annualized_return.to_bits() == o.annualized_return.to_bits()
                && row.annualized_volatility.to_bits() == o.annualized_volatility.to_bits()
                && row.sharpe.map(f64::to_bits) == o.sharpe.map(f64::to_bits)
                && row.windows == o.windows
                && row.flags == o.flags,
            || format!("summary row {} differs", o.label),
        )?;
    }
    for (k, o) in report.objectives.iter().enumerate() {
        let rows = parse_returns_csv(&returns_csv(report, k)).map_err(|e| e.to_string())?;
        ensure(rows.len() == o.daily_returns.len(), || "returns length".into())?;
        for (i, r) in rows.iter().enumerate() {
            ensure(
                r.date == report.dates[i]
                    && r.daily_return.to_bits() == o.daily_returns[i].to_bits()
                    && r.cumulative_return.to_bits() == o.cumulative_returns[i].to_bits(),
                || format!("{} returns row {i} differs", o.label),
            )?;
        }
    }
    let history = parse_weights_csv(&weights_csv(report)).map_err(|e| e.to_string())?;
    ensure(history.tickers == report.tickers, || "weights header".into())?;
    let mut rows = history.rows.iter();
    for w in &report.windows {
        for o in &w.objectives {
            let (idx, label, values) = rows.next().ok_or("missing weights row")?;
            let same = values.iter().map(|v| v.to_bits()).eq(o.weights().values().iter().map(|v| v.to_bits()));
            ensure(*idx == w.window_index && *label == o.label && same, || format!("weights row {idx} differs"))?;
        }
    }

    // every SVG written by every command is well-formed
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = format!(
        r#"{{"data": "{}", "tickers": ["SYN1", "SYN2", "SYN3", "SYN4", "SYN5"], "seed": 3,
            "bounds": {{"lower": 0.02, "upper": 0.98}},
            "objectives": [{{"kind": "EWP"}}, {{"kind": "MVP"}}, {{"kind": "MRP"}}, {{"kind": "MSRP"}}, {{"kind": "BMOP"}}],
            "backtest": {{"end_date": "2015-12-31"}}}}"#,
        fixture_path().display()
    );
    let config_path = dir.path().join("run.json");
    std::fs::write(&config_path, config).map_err(|e| e.to_string())?;
    let config = RunConfig::load(&config_path).map_err(|e| e.to_string())?;
    let mut svgs = 0;
    for kind in [CommandKind::Stats, CommandKind::Optimize, CommandKind::Frontier, CommandKind::Backtest] {
        let written = run(kind, &config, Some(dir.path()), None).map_err(|e| e.to_string())?;
        for path in written.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")) {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let doc = roxmltree::Document::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            ensure(doc.root_element().tag_name().name() == "svg", || format!("{} root", path.display()))?;
            svgs += 1;
        }
    }
    ensure(svgs >= 8, || format!("only {svgs} SVGs written"))?;
    Ok(format!("price reconstruction error {worst:.1e}; report CSVs exact; {svgs} SVGs well-formed"))
}

fn run_criterion(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("criterion {n} PASS {name} ({secs:.1}s): {detail}");
            true
        }
        Err(detail) => {
            println!("criterion {n} FAIL {name} ({secs:.1}s): {detail}");
            false
        }
    }
}

fn main() {
    let scenario_report = || run_backtest(&fixture(), &scenario(SCENARIO_SEED)).expect("scenario backtest");
    let mut results = vec![
        run_criterion(1, "solver correctness vs brute force", criterion_1),
        run_criterion(2, "constraint satisfaction", criterion_2),
        run_criterion(3, "QUBO consistency", criterion_3),
        run_criterion(4, "annealer quality", criterion_4),
        run_criterion(5, "frontier properties", criterion_5),
        run_criterion(6, "backtest integrity", criterion_6),
    ];
    let report = catch_unwind(scenario_report).ok();
    let missing = || Err::<String, _>("scenario backtest failed".to_string());
    results.push(run_criterion(7, "qualitative ordering", || report.as_ref().map_or_else(missing, criterion_7)));
    results.push(run_criterion(8, "metrics", || report.as_ref().map_or_else(missing, criterion_8)));
    results.push(run_criterion(9, "I/O round-trips", || report.as_ref().map_or_else(missing, criterion_9)));
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
