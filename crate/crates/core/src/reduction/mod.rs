//! Collapsing a proxy panel into one reduced-proxy series.
//!
//! The pipeline is: per-series transforms, standardization over a reference
//! window, correlation screening against local instrumental series, and an
//! OLS fit of temperature on the retained proxies.

mod frame;

pub use frame::{Column, ColumnRole, TimeSeriesFrame, Transform, YearRange};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats;

/// Largest accepted condition number of the proxy design matrix.
pub const MAX_CONDITION: f64 = 1e8;

/// Minimum overlap between a proxy and its screening reference.
pub const MIN_SCREEN_OVERLAP: usize = 10;

/// The column centered and scaled to unit sample variance using the present
/// cells inside `window`. Missing cells stay missing.
pub fn standardize(frame: &TimeSeriesFrame, column: &str, window: YearRange) -> Result<Vec<Option<f64>>> {
    let values = frame.values(column)?;
    let inside: Vec<f64> = frame
        .window_indices(window)
        .into_iter()
        .filter_map(|i| values[i])
        .collect();
    if inside.len() < 2 {
        return Err(Error::InsufficientSample(format!(
            "column `{column}` has {} observations in {window}, need 2",
            inside.len()
        )));
    }
    let mean = stats::mean(&inside);
    let sd = stats::sample_sd(&inside);
    if !(sd > 0.0) || sd <= 1e-14 * mean.abs() {
        return Err(Error::DegenerateInput(format!("column `{column}` is constant over {window}")));
    }
    Ok(values.iter().map(|v| v.map(|x| (x - mean) / sd)).collect())
}

/// Standardizes every column with the given role in place.
pub fn standardize_role(frame: &mut TimeSeriesFrame, role: ColumnRole, window: YearRange) -> Result<()> {
    for name in frame.names_with_role(role) {
        let z = standardize(frame, &name, window)?;
        frame.set_values(&name, z)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreenEntry {
    pub proxy: String,
    pub reference: String,
    pub overlap: usize,
    pub correlation: f64,
    pub p_value: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub level: f64,
    pub entries: Vec<ScreenEntry>,
}

impl ScreeningReport {
    pub fn retained(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.retained)
            .map(|e| e.proxy.clone())
            .collect()
    }
}

/// Pearson correlation over the cells where both series are present.
pub fn paired_correlation(a: &[Option<f64>], b: &[Option<f64>]) -> (usize, f64) {
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    let n = xs.len();
    if n < 2 {
        return (n, f64::NAN);
    }
    let (mx, my) = (stats::mean(&xs), stats::mean(&ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (n, sxy / (sxx * syy).sqrt())
}

/// Two-sided p-value of a Pearson correlation `r` from `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Keeps proxies whose correlation with their local reference is significant
/// at `level` under a two-sided t test.
pub fn screen_proxies(
    frame: &TimeSeriesFrame,
    local_reference: &IndexMap<String, String>,
    level: f64,
) -> Result<ScreeningReport> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::ParameterDomain(format!("screening level {level} must be in (0, 1)")));
    }
    let mut entries = Vec::new();
    for proxy in frame.names_with_role(ColumnRole::Proxy) {
        let reference = local_reference
            .get(&proxy)
            .ok_or_else(|| Error::Config(format!("proxy `{proxy}` has no local reference series")))?;
        let (overlap, r) = paired_correlation(frame.values(&proxy)?, frame.values(reference)?);
        if overlap < MIN_SCREEN_OVERLAP {
            return Err(Error::InsufficientSample(format!(
                "proxy `{proxy}` overlaps `{reference}` in {overlap} years, need {MIN_SCREEN_OVERLAP}"
            )));
        }
        if !r.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "proxy `{proxy}` or `{reference}` is constant over their overlap"
            )));
        }
        let p_value = correlation_p_value(r, overlap);
        entries.push(ScreenEntry {
            proxy,
            reference: reference.clone(),
            overlap,
            correlation: r,
            p_value,
            retained: p_value < level,
        });
    }
    Ok(ScreeningReport { level, entries })
}

/// Temperature regressed on proxies, plus the fitted series over the record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedProxy {
    pub weights: IndexMap<String, f64>,
    pub intercept: f64,
    pub years: Vec<i32>,
    /// Fitted value at each year, `None` where some proxy is missing.
    pub series: Vec<Option<f64>>,
    pub r_squared: f64,
    pub fit_window: YearRange,
    pub fit_rows: usize,
}

impl ReducedProxy {
    /// Years and values where the series is defined.
    pub fn present(&self) -> (Vec<i32>, Vec<f64>) {
        self.years
            .iter()
            .zip(&self.series)
            .filter_map(|(y, v)| Some((*y, (*v)?)))
            .unzip()
    }
}

/// OLS of `temperature` on every proxy-role column over the complete rows of
/// `fit_window`, evaluated at every year where all proxies are present.
pub fn fit_reduced_proxy(frame: &TimeSeriesFrame, temperature: &str, fit_window: YearRange) -> Result<ReducedProxy> {
    let proxies = frame.names_with_role(ColumnRole::Proxy);
    if proxies.is_empty() {
        return Err(Error::Config("no proxy columns to reduce".into()));
    }
    let p = proxies.len();
    let temp = frame.values(temperature)?;
    let cols: Vec<&[Option<f64>]> = proxies.iter().map(|n| frame.values(n)).collect::<Result<_>>()?;

    let rows: Vec<usize> = frame
        .window_indices(fit_window)
        .into_iter()
        .filter(|&i| temp[i].is_some() && cols.iter().all(|c| c[i].is_some()))
        .collect();
    if rows.len() < p + 2 {
        return Err(Error::InsufficientSample(format!(
            "{} complete rows in {fit_window} for {p} proxies, need {}",
            rows.len(),
            p + 2
        )));
    }

    for (name, col) in proxies.iter().zip(&cols) {
        if rows.iter().all(|&i| col[i] == Some(0.0)) {
            return Err(Error::DegenerateInput(format!(
                "proxy `{name}` is identically zero over {fit_window}"
            )));
        }
    }

    let x = DMatrix::from_fn(rows.len(), p + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            cols[c - 1][rows[r]].unwrap()
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| temp[i].unwrap()));

    let svd = x.clone().svd(true, true);
    let s = &svd.singular_values;
    let (smax, smin) = (s.max(), s.min());
    let condition = smax / smin;
    if !(condition <= MAX_CONDITION) {
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let k = s.imin();
        let null = v_t.row(k);
        let peak = null.amax();
        let mut columns: Vec<String> = (0..=p)
            .filter(|&c| null[c].abs() > 0.1 * peak)
            .map(|c| if c == 0 { "intercept".to_string() } else { proxies[c - 1].clone() })
            .collect();
        columns.sort();
        return Err(Error::Collinearity { columns, condition });
    }
    let coef = svd
        .solve(&y, 0.0)
        .map_err(|e| Error::NumericalDegeneracy(format!("least squares failed: {e}")))?;

    let fitted = &x * &coef;
    let y_mean = y.mean();
    let sse = (&y - &fitted).norm_squared();
    let sst = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>();
    let r_squared = if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 1.0 };

    let series = (0..frame.len())
        .map(|i| {
            let mut acc = coef[0];
            for (j, col) in cols.iter().enumerate() {
                acc += coef[j + 1] * col[i]?;
            }
            Some(acc)
        })
        .collect();

    Ok(ReducedProxy {
        weights: proxies.into_iter().zip(coef.iter().skip(1).copied()).collect(),
        intercept: coef[0],
        years: frame.years().to_vec(),
        series,
        r_squared,
        fit_window,
        fit_rows: rows.len(),
    })
}
