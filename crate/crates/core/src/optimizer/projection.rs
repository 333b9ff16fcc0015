//! Euclidean projection onto `{w : sum(w) = 1, lower <= w_i <= upper}`.
//!
//! The projection is `w_i = clamp(v_i - tau, lower, upper)` for the unique
//! shift `tau` making the weights sum to one. `g(tau) = sum clamp(...)` is
//! piecewise linear and non-increasing with breakpoints at `v_i - upper` and
//! `v_i - lower`; sorting the breakpoints locates the linear piece holding the
//! root, which is then solved in closed form.

use nalgebra::DVector;

fn shifted_sum(v: &DVector<f64>, tau: f64, lower: f64, upper: f64) -> f64 {
    v.iter().map(|x| (x - tau).clamp(lower, upper)).sum()
}

/// Requires `n * lower <= 1 <= n * upper`.
pub fn project_capped_simplex(v: &DVector<f64>, lower: f64, upper: f64) -> DVector<f64> {
    let mut breaks: Vec<f64> = v.iter().flat_map(|x| [x - upper, x - lower]).collect();
    breaks.sort_by(f64::total_cmp);

    // first breakpoint with g <= 1
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if shifted_sum(v, breaks[mid], lower, upper) <= 1.0 {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let k = hi;
    let tau = if k == 0 {
        breaks[0]
    } else {
        let (a, b) = (breaks[k - 1], breaks[k]);
        let ga = shifted_sum(v, a, lower, upper);
        let mid = 0.5 * (a + b);
        let free = v.iter().filter(|x| *x - upper < mid && mid < *x - lower).count();
        if free == 0 || ga <= 1.0 {
            a
        } else {
            (a + (ga - 1.0) / free as f64).min(b)
        }
    };
    v.map(|x| (x - tau).clamp(lower, upper))
}
