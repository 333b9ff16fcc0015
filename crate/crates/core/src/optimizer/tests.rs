use super::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i}")).collect()
}

fn stats(mean: &[f64], cov: &[f64]) -> ExpectedStats {
    let n = mean.len();
    ExpectedStats::new(tickers(n), DVector::from_column_slice(mean), DMatrix::from_row_slice(n, n, cov)).unwrap()
}

fn random_stats(seed: u64, n: usize) -> ExpectedStats {
    let mut g = crate::rng::stream(seed, &[n as u64]);
    let a = DMatrix::from_fn(n, n, |_, _| g.random_range(-0.2..0.2));
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.001;
    let mean = DVector::from_fn(n, |_, _| g.random_range(-0.01..0.03));
    ExpectedStats::new(tickers(n), mean, (&cov + cov.transpose()) * 0.5).unwrap()
}

fn var(s: &ExpectedStats, w: &DVector<f64>) -> f64 {
    w.dot(&(s.covariance() * w))
}

fn ret(s: &ExpectedStats, w: &DVector<f64>) -> f64 {
    s.mean().dot(w)
}

/// Every point of the 3-asset simplex on a grid of `1/steps`.
fn grid3(steps: usize) -> impl Iterator<Item = DVector<f64>> {
    (0..=steps).flat_map(move |i| {
        (0..=steps - i).map(move |j| {
            let k = steps - i - j;
            DVector::from_vec(vec![i as f64, j as f64, k as f64]) / steps as f64
        })
    })
}

fn full_bounds() -> WeightBounds {
    WeightBounds::new(0.0, 1.0).unwrap()
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn mvp_diagonal_closed_form() {
    let s = stats(&[0.01, 0.01], &[0.04, 0.0, 0.0, 0.01]);
    let sol = solve_mvp(&s, 0.0, &full_bounds(), &settings()).unwrap();
    let w = sol.weights.values();
    assert!((w[0] - 0.2).abs() < 1e-6 && (w[1] - 0.8).abs() < 1e-6, "{w}");
    // grid at 0.001 agrees on the argmin
    let best = (0..=1000)
        .map(|i| i as f64 / 1000.0)
        .min_by(|a, b| {
            let f = |x: f64| 0.04 * x * x + 0.01 * (1.0 - x) * (1.0 - x);
            f(*a).total_cmp(&f(*b))
        })
        .unwrap();
    assert!((best - 0.2).abs() < 1e-12);
}

#[test]
fn single_asset_is_forced() {
    let s = stats(&[0.5], &[0.3]);
    for sol in [
        solve_mvp(&s, 10.0, &full_bounds(), &settings()).unwrap(),
        solve_mrp(&s, 0.001, &full_bounds(), &settings()).unwrap(),
        solve_mop(&s, 3.0, &full_bounds(), &settings()).unwrap(),
        solve_msrp(&s, 0.0, &full_bounds(), &settings()).unwrap(),
    ] {
        assert_eq!(sol.weights.values().as_slice(), &[1.0]);
    }
    let sol = solve_msrp(&s, 0.1, &full_bounds(), &settings()).unwrap();
    let sharpe = (ret(&s, sol.weights.values()) - 0.1) / var(&s, sol.weights.values()).sqrt();
    assert!((sharpe - 0.4 / 0.3f64.sqrt()).abs() < 1e-15);
}

#[test]
fn duplicated_assets_reach_single_variance() {
    let s = stats(&[0.01, 0.01], &[0.04, 0.04, 0.04, 0.04]);
    let sol = solve_mvp(&s, 0.0, &full_bounds(), &settings()).unwrap();
    assert!(sol.flags.contains(&Flag::RidgeRepaired));
    assert!((var(&s, sol.weights.values()) - 0.04).abs() < 1e-9);
}

#[test]
fn mrp_inactive_cap_takes_best_asset() {
    let s = stats(&[0.01, 0.03, 0.02], &[0.04, 0.0, 0.0, 0.0, 0.09, 0.01, 0.0, 0.01, 0.02]);
    let sol = solve_mrp(&s, 10.0, &full_bounds(), &settings()).unwrap();
    let w = sol.weights.values();
    assert!((w[1] - 1.0).abs() < 1e-12, "{w}");
}

#[test]
fn mrp_equal_means_flat_objective() {
    let s = stats(&[0.02, 0.02], &[0.04, 0.01, 0.01, 0.09]);
    let sol = solve_mrp(&s, 0.5, &full_bounds(), &settings()).unwrap();
    assert!((ret(&s, sol.weights.values()) - 0.02).abs() < 1e-9);
}

#[test]
fn mrp_matches_grid_oracle() {
    for seed in 0..10 {
        let s = random_stats(seed, 3);
        let gmv = solve_min_variance(&s, &full_bounds(), &settings()).unwrap();
        let v = (var(&s, gmv.weights.values()) * 1.5).sqrt();
        let sol = solve_mrp(&s, v, &full_bounds(), &settings()).unwrap();
        let w = sol.weights.values();
        assert!(var(&s, w) <= v * v * (1.0 + 1e-9));
        let oracle = grid3(200)
            .filter(|g| var(&s, g) <= v * v)
            .map(|g| ret(&s, &g))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(ret(&s, w) >= oracle - 1e-6, "seed {seed}: {} < {oracle}", ret(&s, w));
    }
}

#[test]
fn msrp_equal_means_is_min_variance() {
    // equal means: maximizing (mu - rf)/sigma is minimizing sigma, w_i ~ 1/sigma_ii
    let s = stats(&[0.05, 0.05, 0.05], &[0.04, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.02]);
    let sol = solve_msrp(&s, 0.0, &full_bounds(), &settings()).unwrap();
    let inv = [25.0, 100.0, 50.0];
    let total: f64 = inv.iter().sum();
    for (w, i) in sol.weights.values().iter().zip(inv) {
        assert!((w - i / total).abs() < 1e-6);
    }
}

#[test]
fn msrp_flags_when_nothing_beats_risk_free() {
    let s = stats(&[0.01, 0.02], &[0.04, 0.0, 0.0, 0.01]);
    let sol = solve_msrp(&s, 0.05, &full_bounds(), &settings()).unwrap();
    assert!(sol.flags.contains(&Flag::NoExcessReturn));
}

#[test]
fn msrp_zero_volatility_is_degenerate() {
    let s = stats(&[0.01, 0.02], &[0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        solve_msrp(&s, 0.0, &full_bounds(), &settings()),
        Err(SolverError::DegeneratePortfolio(_))
    ));
}

#[test]
fn mop_limits() {
    let s = random_stats(5, 4);
    let gmv = solve_min_variance(&s, &full_bounds(), &settings()).unwrap();
    let tiny = solve_mop(&s, 1e-12, &full_bounds(), &settings()).unwrap();
    assert!((gmv.weights.values() - tiny.weights.values()).amax() < 1e-6);
    let big = solve_mop(&s, 1e6, &full_bounds(), &settings()).unwrap();
    let best = s.mean().imax();
    assert!((big.weights.values()[best] - 1.0).abs() < 1e-9);
}

#[test]
fn mop_matches_grid_oracle() {
    for seed in 0..10 {
        let s = random_stats(100 + seed, 3);
        let sol = solve_mop(&s, 1.0, &full_bounds(), &settings()).unwrap();
        let f = |w: &DVector<f64>| var(&s, w) - ret(&s, w);
        let oracle = grid3(200).map(|g| f(&g)).fold(f64::INFINITY, f64::min);
        assert!(f(sol.weights.values()) <= oracle + 1e-6);
    }
}

#[test]
fn mvp_matches_grid_oracle_with_active_target() {
    for seed in 0..10 {
        let s = random_stats(200 + seed, 3);
        let gmv = solve_min_variance(&s, &full_bounds(), &settings()).unwrap();
        let r_max = bounded_max_return(&s, &full_bounds()).unwrap();
        let target = 0.5 * (ret(&s, gmv.weights.values()) + r_max);
        let sol = solve_mvp(&s, target, &full_bounds(), &settings()).unwrap();
        let w = sol.weights.values();
        assert!(ret(&s, w) >= target);
        let oracle = grid3(200)
            .filter(|g| ret(&s, g) >= target)
            .map(|g| var(&s, &g))
            .fold(f64::INFINITY, f64::min);
        assert!(var(&s, w) <= oracle + 1e-6);
    }
}

#[test]
fn infeasible_targets_fall_back_with_flags() {
    let s = stats(&[0.01, 0.02], &[0.04, 0.0, 0.0, 0.01]);
    let sol = solve_mvp(&s, 0.5, &full_bounds(), &settings()).unwrap();
    assert!(sol.flags.contains(&Flag::ReturnInfeasible));
    assert_eq!(sol.weights.values().as_slice(), &[0.0, 1.0]);
    let sol = solve_mrp(&s, 0.001, &full_bounds(), &settings()).unwrap();
    assert!(sol.flags.contains(&Flag::VolatilityInfeasible));
    assert!((sol.weights.values()[0] - 0.2).abs() < 1e-6);
}

#[test]
fn bounds_are_validated() {
    assert!(WeightBounds::new(0.5, 0.4).is_err());
    assert!(WeightBounds::new(-0.1, 1.0).is_err());
    let s = random_stats(1, 3);
    let b = WeightBounds::new(0.4, 0.9).unwrap();
    assert!(matches!(
        solve_mvp(&s, 0.0, &b, &settings()),
        Err(SolverError::InfeasibleBounds { n: 3, .. })
    ));
    let b = WeightBounds::new(0.0, 0.2).unwrap();
    assert!(solve_mop(&s, 1.0, &b, &settings()).is_err());
}

#[test]
fn non_finite_parameters_rejected() {
    let s = random_stats(1, 3);
    assert!(solve_mvp(&s, f64::NAN, &full_bounds(), &settings()).is_err());
    assert!(solve_mrp(&s, -1.0, &full_bounds(), &settings()).is_err());
}

#[test]
fn box_bounds_respected() {
    let b = WeightBounds::new(0.02, 0.98).unwrap();
    for seed in 0..20 {
        let s = random_stats(300 + seed, 2 + (seed as usize % 6));
        for sol in [
            solve_mvp(&s, 0.02, &b, &settings()).unwrap(),
            solve_mrp(&s, 0.2, &b, &settings()).unwrap(),
            solve_msrp(&s, 0.0, &b, &settings()).unwrap(),
            solve_mop(&s, 1.0, &b, &settings()).unwrap(),
        ] {
            sol.weights.check_bounds(&b).unwrap();
        }
    }
}

#[test]
fn mvp_scale_equivariance() {
    let s = random_stats(9, 5);
    let scaled = ExpectedStats::new(s.tickers().to_vec(), s.mean().clone(), s.covariance() * 7.5).unwrap();
    let a = solve_mvp(&s, -1.0, &full_bounds(), &settings()).unwrap();
    let b = solve_mvp(&scaled, -1.0, &full_bounds(), &settings()).unwrap();
    assert!((a.weights.values() - b.weights.values()).amax() < 1e-6);
}

#[test]
fn mvp_variance_monotone_in_target() {
    let s = random_stats(11, 5);
    let sweep = frontier_sweep(&s, &full_bounds(), &settings(), 30).unwrap();
    for pair in sweep.windows(2) {
        assert!(pair[1].volatility >= pair[0].volatility - 1e-8);
    }
}

#[test]
fn solves_are_deterministic() {
    let s = random_stats(13, 6);
    let a = solve_msrp(&s, 0.0, &full_bounds(), &settings()).unwrap();
    let b = solve_msrp(&s, 0.0, &full_bounds(), &settings()).unwrap();
    assert_eq!(a, b);
}
