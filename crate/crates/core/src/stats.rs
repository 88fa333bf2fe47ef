//! Descriptive statistics shared across modules.

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn mean<T: Real>(x: &[T]) -> T {
    let n = T::from_usize_lossy(x.len());
    x.iter().fold(T::zero(), |a, &b| a + b) / n
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    let ss = x.iter().fold(T::zero(), |a, &b| a + (b - m) * (b - m));
    ss / T::from_usize_lossy(x.len() - 1)
}

pub fn sample_sd<T: Real>(x: &[T]) -> T {
    sample_variance(x).sqrt()
}

/// Type-7 empirical quantile (linear interpolation between order
/// statistics at `h = (n - 1) p`) of an already sorted slice.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let h = T::from_usize_lossy(n - 1) * p;
    let lo = h.floor();
    let lo_idx = lo.to_usize().unwrap_or(0).min(n - 1);
    let hi_idx = (lo_idx + 1).min(n - 1);
    let frac = h - lo;
    sorted[lo_idx] + frac * (sorted[hi_idx] - sorted[lo_idx])
}

pub fn sorted<T: Real>(x: &[T]) -> Vec<T> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    v
}

/// Type-7 quantile of an unsorted sample.
pub fn quantile<T: Real>(x: &[T], p: T) -> T {
    quantile_sorted(&sorted(x), p)
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn simple_regression(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape("regression needs two equal-length series".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateInput("constant regressor".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
