//! Long-only mean-variance solvers over `{sum(w) = 1, lower <= w_i <= upper}`.
//!
//! Every problem reduces to the multi-objective core
//! `min w'Sw - lambda * w'r`, solved by accelerated projected gradient with
//! step `1/L` (`L = 2 * largest eigenvalue of S`) and exact projection onto
//! the capped simplex. The return floor of MVP and the variance cap of MRP
//! are handled through their Lagrange multiplier: along the path
//! `lambda -> w(lambda)` both the return and the variance are non-decreasing,
//! so a bracketing bisection on `lambda` lands on the binding constraint with
//! the returned iterate always on the feasible side.

mod projection;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flags::{push_unique, Flag};
use crate::stats::{max_eigenvalue, ExpectedStats};

pub use projection::project_capped_simplex;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("infeasible weight bounds [{lower}, {upper}] for {n} assets")]
    InfeasibleBounds { lower: f64, upper: f64, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate portfolio: {0}")]
    DegeneratePortfolio(String),
}

/// Per-asset weight box shared by all assets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }
}

impl WeightBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, SolverError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let ok = self.lower.is_finite()
            && self.upper.is_finite()
            && (0.0..1.0).contains(&self.lower)
            && self.upper > 0.0
            && self.upper <= 1.0
            && self.lower < self.upper;
        if ok {
            Ok(())
        } else {
            Err(SolverError::InfeasibleBounds {
                lower: self.lower,
                upper: self.upper,
                n: 0,
            })
        }
    }

    /// `n * lower <= 1 <= n * upper`.
    pub fn check_feasible(&self, n: usize) -> Result<(), SolverError> {
        self.validate()?;
        let nf = n as f64;
        if n == 0 || nf * self.lower > 1.0 + 1e-12 || nf * self.upper < 1.0 - 1e-12 {
            return Err(SolverError::InfeasibleBounds {
                lower: self.lower,
                upper: self.upper,
                n,
            });
        }
        Ok(())
    }
}

pub const SUM_TOL: f64 = 1e-8;
pub const BOUND_TOL: f64 = 1e-9;

/// Allocation vector labelled by ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    tickers: Vec<String>,
    values: DVector<f64>,
}

impl Weights {
    pub fn new(tickers: Vec<String>, values: DVector<f64>) -> Result<Self, SolverError> {
        if tickers.len() != values.len() {
            return Err(SolverError::DimensionMismatch(format!(
                "{} tickers for {} weights",
                tickers.len(),
                values.len()
            )));
        }
        let w = Self { tickers, values };
        w.check_simplex()?;
        Ok(w)
    }

    pub fn equal(tickers: &[String]) -> Self {
        let n = tickers.len();
        Self {
            tickers: tickers.to_vec(),
            values: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum to one within `1e-8`, every entry `>= -1e-9`.
    pub fn check_simplex(&self) -> Result<(), SolverError> {
        let sum: f64 = self.values.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > SUM_TOL {
            return Err(SolverError::DegeneratePortfolio(format!("weights sum to {sum}")));
        }
        if let Some(v) = self.values.iter().find(|v| **v < -BOUND_TOL) {
            return Err(SolverError::DegeneratePortfolio(format!("negative weight {v}")));
        }
        Ok(())
    }

    /// Every entry within `[lower - 1e-9, upper + 1e-9]`.
    pub fn check_bounds(&self, bounds: &WeightBounds) -> Result<(), SolverError> {
        self.check_simplex()?;
        if let Some(v) = self
            .values
            .iter()
            .find(|v| **v < bounds.lower - BOUND_TOL || **v > bounds.upper + BOUND_TOL)
        {
            return Err(SolverError::DegeneratePortfolio(format!(
                "weight {v} outside [{}, {}]",
                bounds.lower, bounds.upper
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Stop when the projected-gradient step moves no weight by more than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Multiplier growth per bracketing round of the constraint search.
    pub penalty_growth: f64,
    pub frontier_points: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 50_000,
            penalty_growth: 10.0,
            frontier_points: 50,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(SolverError::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 || self.frontier_points == 0 {
            return Err(SolverError::InvalidParameter(
                "max_iterations and frontier_points must be positive".into(),
            ));
        }
        if !(self.penalty_growth > 1.0 && self.penalty_growth.is_finite()) {
            return Err(SolverError::InvalidParameter("penalty_growth must exceed 1".into()));
        }
        Ok(())
    }
}

/// Solver output: weights plus any annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Weights,
    pub flags: Vec<Flag>,
}

/// One point of a target-return sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub target_return: f64,
    pub expected_return: f64,
    pub volatility: f64,
    pub weights: Weights,
    pub flags: Vec<Flag>,
}

const MAX_BRACKET_ROUNDS: usize = 400;
const MAX_BISECTIONS: usize = 200;

/// A validated problem instance: statistics, bounds and derived constants.
struct Problem<'a> {
    tickers: &'a [String],
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    bounds: WeightBounds,
    settings: SolverSettings,
    lipschitz: f64,
    flags: Vec<Flag>,
}

impl<'a> Problem<'a> {
    fn new(stats: &'a ExpectedStats, bounds: &WeightBounds, settings: &SolverSettings) -> Result<Self, SolverError> {
        settings.validate()?;
        bounds.check_feasible(stats.n_assets())?;
        let mut flags = Vec::new();
        let cov = if stats.n_assets() > 1 && stats.is_singular() {
            flags.push(Flag::RidgeRepaired);
            stats.ridge_repaired().covariance().clone()
        } else {
            stats.covariance().clone()
        };
        let top = max_eigenvalue(&cov);
        let lipschitz = if top > 0.0 { 2.0 * top } else { 1.0 };
        Ok(Self {
            tickers: stats.tickers(),
            mean: stats.mean().clone(),
            cov,
            bounds: *bounds,
            settings: *settings,
            lipschitz,
            flags,
        })
    }

    fn n(&self) -> usize {
        self.mean.len()
    }

    fn ret(&self, w: &DVector<f64>) -> f64 {
        self.mean.dot(w)
    }

    fn var(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.cov * w))
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        project_capped_simplex(v, self.bounds.lower, self.bounds.upper)
    }

    fn start(&self) -> DVector<f64> {
        self.project(&DVector::from_element(self.n(), 1.0 / self.n() as f64))
    }

    fn solution(&self, w: DVector<f64>, extra: &[Flag]) -> Solution {
        let mut flags = self.flags.clone();
        for f in extra {
            push_unique(&mut flags, *f);
        }
        Solution {
            weights: Weights {
                tickers: self.tickers.to_vec(),
                values: w,
            },
            flags,
        }
    }

    /// `argmin w'Sw - lambda w'r` by accelerated projected gradient with
    /// gradient-based momentum restart. Returns the iterate and whether it
    /// converged within `max_iterations`.
    fn mop(&self, lambda: f64, warm: Option<&DVector<f64>>) -> (DVector<f64>, bool) {
        if self.n() == 1 {
            return (DVector::from_element(1, 1.0), true);
        }
        let step = 1.0 / self.lipschitz;
        let linear = &self.mean * lambda;
        let mut x = warm.cloned().unwrap_or_else(|| self.start());
        let mut y = x.clone();
        let mut t = 1.0f64;
        for _ in 0..self.settings.max_iterations {
            let grad = (&self.cov * &y) * 2.0 - &linear;
            let next = self.project(&(&y - grad * step));
            let moved = (&next - &y).amax();
            if moved <= self.settings.tolerance {
                return (next, true);
            }
            // restart momentum when it points uphill
            if (&y - &next).dot(&(&next - &x)) > 0.0 {
                t = 1.0;
                y = next.clone();
                x = next;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            x = next;
            t = t_next;
        }
        (x, false)
    }

    fn gmv(&self) -> (DVector<f64>, bool) {
        self.mop(0.0, None)
    }

    /// Exact maximizer of `w'r` over the capped simplex: fill the lower
    /// bounds, then pour the remaining budget into assets by descending mean
    /// (ties to lower variance, then lower index).
    fn max_return_vertex(&self) -> DVector<f64> {
        let n = self.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            self.mean[b]
                .total_cmp(&self.mean[a])
                .then(self.cov[(a, a)].total_cmp(&self.cov[(b, b)]))
                .then(a.cmp(&b))
        });
        let mut w = DVector::from_element(n, self.bounds.lower);
        let mut budget = 1.0 - self.bounds.lower * n as f64;
        for i in order {
            let add = budget.min(self.bounds.upper - self.bounds.lower).max(0.0);
            w[i] += add;
            budget -= add;
        }
        w
    }

    fn max_return(&self) -> f64 {
        self.ret(&self.max_return_vertex())
    }

    fn lambda_scale(&self) -> f64 {
        let spread = self.mean.amax().max(f64::MIN_POSITIVE);
        (self.lipschitz / spread).max(f64::MIN_POSITIVE)
    }

    fn at_top(&self, r: f64, r_max: f64) -> bool {
        r >= r_max - 1e-12 * r_max.abs().max(1e-300)
    }

    /// Minimum variance subject to `w'r >= target`.
    fn mvp(&self, target: f64) -> Solution {
        let (w0, ok0) = self.gmv();
        let mut extra = Vec::new();
        if !ok0 {
            extra.push(Flag::IterationLimit);
        }
        if self.ret(&w0) >= target {
            return self.solution(w0, &extra);
        }
        let vertex = self.max_return_vertex();
        let r_max = self.ret(&vertex);
        if target > r_max {
            extra.push(Flag::ReturnInfeasible);
            return self.solution(vertex, &extra);
        }
        // bracket: ret(lo) < target <= ret(hi)
        let growth = self.settings.penalty_growth;
        let (mut lo, mut w_lo) = (0.0, w0);
        let mut hi = self.lambda_scale();
        let mut w_hi = None;
        for _ in 0..MAX_BRACKET_ROUNDS {
            let (w, ok) = self.mop(hi, Some(&w_lo));
            if !ok {
                push_unique(&mut extra, Flag::IterationLimit);
            }
            if self.ret(&w) >= target {
                w_hi = Some(w);
                break;
            }
            if self.at_top(self.ret(&w), r_max) {
                break;
            }
            lo = hi;
            w_lo = w;
            hi *= growth;
            if !hi.is_finite() {
                break;
            }
        }
        let Some(mut w_hi) = w_hi else {
            return self.solution(vertex, &extra);
        };
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= 1e-13 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let (w, ok) = self.mop(mid, Some(&w_hi));
            if !ok {
                push_unique(&mut extra, Flag::IterationLimit);
            }
            if self.ret(&w) >= target {
                hi = mid;
                w_hi = w;
            } else {
                lo = mid;
            }
        }
        self.solution(w_hi, &extra)
    }

    /// Maximum return subject to `w'Sw <= cap`.
    fn mrp(&self, cap: f64) -> Solution {
        let (w0, ok0) = self.gmv();
        let mut extra = Vec::new();
        if !ok0 {
            extra.push(Flag::IterationLimit);
        }
        if self.var(&w0) > cap {
            extra.push(Flag::VolatilityInfeasible);
            return self.solution(w0, &extra);
        }
        let r_max = self.max_return();
        if self.at_top(self.ret(&w0), r_max) {
            return self.solution(w0, &extra);
        }
        // bracket: var(lo) <= cap < var(hi)
        let growth = self.settings.penalty_growth;
        let (mut lo, mut w_lo) = (0.0, w0);
        let mut hi = self.lambda_scale();
        let mut bracketed = false;
        for _ in 0..MAX_BRACKET_ROUNDS {
            let (w, ok) = self.mop(hi, Some(&w_lo));
            if !ok {
                push_unique(&mut extra, Flag::IterationLimit);
            }
            if self.var(&w) > cap {
                bracketed = true;
                break;
            }
            let top = self.at_top(self.ret(&w), r_max);
            lo = hi;
            w_lo = w;
            if top {
                break;
            }
            hi *= growth;
            if !hi.is_finite() {
                break;
            }
        }
        if bracketed {
            for _ in 0..MAX_BISECTIONS {
                if hi - lo <= 1e-13 * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (w, ok) = self.mop(mid, Some(&w_lo));
                if !ok {
                    push_unique(&mut extra, Flag::IterationLimit);
                }
                if self.var(&w) <= cap {
                    lo = mid;
                    w_lo = w;
                } else {
                    hi = mid;
                }
            }
        }
        self.solution(w_lo, &extra)
    }

    /// Uniform target-return sweep from the minimum-variance return to the
    /// bounded maximum return, one MVP solve per target.
    fn sweep(&self, points: usize) -> Vec<FrontierPoint> {
        let (w0, _) = self.gmv();
        let r_min = self.ret(&w0);
        let r_max = self.max_return().max(r_min);
        let targets: Vec<f64> = if points <= 1 {
            vec![r_min]
        } else {
            (0..points)
                .map(|k| {
                    if k + 1 == points {
                        r_max
                    } else {
                        r_min + (r_max - r_min) * k as f64 / (points - 1) as f64
                    }
                })
                .collect()
        };
        targets.par_iter().map(|&target| self.point(target)).collect()
    }

    fn point(&self, target: f64) -> FrontierPoint {
        let s = self.mvp(target);
        let w = s.weights.values();
        FrontierPoint {
            target_return: target,
            expected_return: self.ret(w),
            volatility: self.var(w).max(0.0).sqrt(),
            weights: s.weights.clone(),
            flags: s.flags,
        }
    }
}

const GOLDEN_ITERATIONS: usize = 40;

fn sharpe_of(p: &FrontierPoint, risk_free_rate: f64) -> f64 {
    (p.expected_return - risk_free_rate) / p.volatility
}

/// Golden-section search for the Sharpe maximum on `[lo, hi]` of target
/// returns. The Sharpe ratio is quasi-concave along the upper frontier
/// wherever it is positive.
fn golden_sharpe(p: &Problem<'_>, risk_free_rate: f64, mut lo: f64, mut hi: f64) -> Option<FrontierPoint> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |t: f64| {
        let pt = p.point(t);
        let s = if pt.volatility > 0.0 { sharpe_of(&pt, risk_free_rate) } else { f64::NEG_INFINITY };
        (s, pt)
    };
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut pa) = eval(a);
    let (mut fb, mut pb) = eval(b);
    for _ in 0..GOLDEN_ITERATIONS {
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
        if fa >= fb {
            hi = b;
            (b, fb, pb) = (a, fa, pa);
            a = hi - inv_phi * (hi - lo);
            (fa, pa) = eval(a);
        } else {
            lo = a;
            (a, fa, pa) = (b, fb, pb);
            b = lo + inv_phi * (hi - lo);
            (fb, pb) = eval(b);
        }
    }
    let best = if fa >= fb { (fa, pa) } else { (fb, pb) };
    best.0.is_finite().then_some(best.1)
}

fn check_finite(name: &str, v: f64) -> Result<(), SolverError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SolverError::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

/// Global minimum-variance portfolio under the bounds.
pub fn solve_min_variance(stats: &ExpectedStats, bounds: &WeightBounds, settings: &SolverSettings) -> Result<Solution, SolverError> {
    let p = Problem::new(stats, bounds, settings)?;
    let (w, ok) = p.gmv();
    Ok(p.solution(w, if ok { &[] } else { &[Flag::IterationLimit] }))
}

/// Minimum variance with return at least `target_return` (per period).
pub fn solve_mvp(
    stats: &ExpectedStats,
    target_return: f64,
    bounds: &WeightBounds,
    settings: &SolverSettings,
) -> Result<Solution, SolverError> {
    check_finite("target_return", target_return)?;
    Ok(Problem::new(stats, bounds, settings)?.mvp(target_return))
}

/// Maximum return with volatility at most `target_volatility` (per period).
pub fn solve_mrp(
    stats: &ExpectedStats,
    target_volatility: f64,
    bounds: &WeightBounds,
    settings: &SolverSettings,
) -> Result<Solution, SolverError> {
    check_finite("target_volatility", target_volatility)?;
    if target_volatility <= 0.0 {
        return Err(SolverError::InvalidParameter("target_volatility must be positive".into()));
    }
    Ok(Problem::new(stats, bounds, settings)?.mrp(target_volatility * target_volatility))
}

/// Minimizes `w'Sw - risk_aversion * w'r`.
pub fn solve_mop(
    stats: &ExpectedStats,
    risk_aversion: f64,
    bounds: &WeightBounds,
    settings: &SolverSettings,
) -> Result<Solution, SolverError> {
    check_finite("risk_aversion", risk_aversion)?;
    if risk_aversion < 0.0 {
        return Err(SolverError::InvalidParameter("risk_aversion must be non-negative".into()));
    }
    let p = Problem::new(stats, bounds, settings)?;
    let (w, ok) = p.mop(risk_aversion, None);
    Ok(p.solution(w, if ok { &[] } else { &[Flag::IterationLimit] }))
}

/// Frontier point with the largest `(w'r - rf) / sqrt(w'Sw)`. A sweep of
/// `frontier_points` targets locates the maximum (ties go to the lower
/// volatility, then the lexicographically smaller weight vector); a
/// golden-section search between the neighbouring targets refines it.
pub fn solve_msrp(
    stats: &ExpectedStats,
    risk_free_rate: f64,
    bounds: &WeightBounds,
    settings: &SolverSettings,
) -> Result<Solution, SolverError> {
    check_finite("risk_free_rate", risk_free_rate)?;
    let p = Problem::new(stats, bounds, settings)?;
    let sweep = p.sweep(settings.frontier_points);
    let mut best: Option<(f64, usize)> = None;
    for (k, pt) in sweep.iter().enumerate() {
        if pt.volatility <= 0.0 {
            return Err(SolverError::DegeneratePortfolio(
                "zero-volatility frontier point leaves the Sharpe ratio undefined".into(),
            ));
        }
        let sharpe = sharpe_of(pt, risk_free_rate);
        let better = match best {
            None => true,
            Some((s, b)) => {
                let b = &sweep[b];
                sharpe > s
                    || (sharpe == s
                        && (pt.volatility < b.volatility
                            || (pt.volatility == b.volatility && lexicographically_less(&pt.weights, &b.weights))))
            }
        };
        if better {
            best = Some((sharpe, k));
        }
    }
    let (best_sharpe, k) = best.expect("sweep yields at least one point");
    let mut pt = sweep[k].clone();
    if sweep.len() > 1 {
        let lo = sweep[k.saturating_sub(1)].target_return;
        let hi = sweep[(k + 1).min(sweep.len() - 1)].target_return;
        if let Some(refined) = golden_sharpe(&p, risk_free_rate, lo, hi) {
            let s = sharpe_of(&refined, risk_free_rate);
            if s > best_sharpe {
                pt = refined;
            }
        }
    }
    let mut flags = pt.flags;
    if stats.mean().iter().all(|m| *m <= risk_free_rate) {
        push_unique(&mut flags, Flag::NoExcessReturn);
    }
    Ok(Solution {
        weights: pt.weights,
        flags,
    })
}

fn lexicographically_less(a: &Weights, b: &Weights) -> bool {
    for (x, y) in a.values.iter().zip(b.values.iter()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// `points` MVP solutions at uniformly spaced targets between the
/// minimum-variance return and the bounded maximum return.
pub fn frontier_sweep(
    stats: &ExpectedStats,
    bounds: &WeightBounds,
    settings: &SolverSettings,
    points: usize,
) -> Result<Vec<FrontierPoint>, SolverError> {
    if points == 0 {
        return Err(SolverError::InvalidParameter("points must be positive".into()));
    }
    Ok(Problem::new(stats, bounds, settings)?.sweep(points))
}

/// Maximum of `w'r` under the bounds, attained at a vertex.
pub fn bounded_max_return(stats: &ExpectedStats, bounds: &WeightBounds) -> Result<f64, SolverError> {
    Ok(Problem::new(stats, bounds, &SolverSettings::default())?.max_return())
}

#[cfg(test)]
mod tests;
