//! Reconstruction scores, convergence diagnostics and the TCR transform.
//!
//! Conventions: central intervals use type-7 quantiles of the draws, sample
//! variances use the `n - 1` denominator, and IS and CRPS are smaller-is-better.

use indexmap::IndexMap;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Minimum number of draws for interval-based scores.
pub const MIN_INTERVAL_DRAWS: usize = 40;

/// Minimum chain length for the scale-reduction factors.
pub const MIN_CHAIN_LENGTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetrics {
    pub sq_bias: f64,
    pub variance: f64,
    pub rmse: f64,
}

/// Squared mean difference, sample variance of the differences, and their
/// root sum.
pub fn point_metrics(posterior_mean: &[f64], observed: &[f64]) -> Result<PointMetrics> {
    check_same_len(posterior_mean.len(), observed.len())?;
    if observed.len() < 2 {
        return Err(Error::InsufficientSample("point metrics need two years".into()));
    }
    let diff: Vec<f64> = posterior_mean.iter().zip(observed).map(|(m, y)| m - y).collect();
    let bias = stats::mean(&diff);
    let sq_bias = bias * bias;
    let variance = stats::sample_variance(&diff);
    Ok(PointMetrics { sq_bias, variance, rmse: (sq_bias + variance).sqrt() })
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::ParameterDomain(format!("level {level} must be in (0, 1)")));
    }
    Ok(())
}

/// Central interval of mass `level` per column of `draws` (rows are draws).
pub fn central_intervals(draws: &DMatrix<f64>, level: f64) -> Result<Vec<(f64, f64)>> {
    check_level(level)?;
    if draws.nrows() < MIN_INTERVAL_DRAWS {
        return Err(Error::InsufficientSample(format!(
            "{} draws, need at least {MIN_INTERVAL_DRAWS}",
            draws.nrows()
        )));
    }
    let a = (1.0 - level) / 2.0;
    Ok(draws
        .column_iter()
        .map(|c| {
            let s = stats::sorted(c.as_slice());
            (stats::quantile_sorted(&s, a), stats::quantile_sorted(&s, 1.0 - a))
        })
        .collect())
}

/// Percentage of years whose observation lies in the central interval.
pub fn ecp(draws: &DMatrix<f64>, observed: &[f64], level: f64) -> Result<f64> {
    check_same_len(draws.ncols(), observed.len())?;
    let iv = central_intervals(draws, level)?;
    let hit = iv
        .iter()
        .zip(observed)
        .filter(|((l, u), y)| *l <= **y && **y <= *u)
        .count();
    Ok(100.0 * hit as f64 / observed.len() as f64)
}

/// Interval score of one interval at miss-rate `alpha`.
pub fn interval_score_single(lo: f64, hi: f64, y: f64, alpha: f64) -> f64 {
    (hi - lo) + (2.0 / alpha) * (lo - y).max(0.0) + (2.0 / alpha) * (y - hi).max(0.0)
}

/// Mean interval score over years.
pub fn interval_score(draws: &DMatrix<f64>, observed: &[f64], level: f64) -> Result<f64> {
    check_same_len(draws.ncols(), observed.len())?;
    let iv = central_intervals(draws, level)?;
    let alpha = 1.0 - level;
    let total: f64 = iv
        .iter()
        .zip(observed)
        .map(|(&(l, u), &y)| interval_score_single(l, u, y, alpha))
        .sum();
    Ok(total / observed.len() as f64)
}

/// Ensemble CRPS `E|X - y| - E|X - X'|/2` in `O(m log m)`.
pub fn crps_sample(draws: &[f64], y: f64) -> Result<f64> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::InsufficientSample(format!("CRPS needs two draws, got {m}")));
    }
    let s = stats::sorted(draws);
    let mf = m as f64;
    let abs_dev = s.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    // sum_{i,j} |x_i - x_j| = 2 sum_i (2i - m + 1) x_(i)
    let pair = s
        .iter()
        .enumerate()
        .map(|(i, x)| (2.0 * i as f64 - mf + 1.0) * x)
        .sum::<f64>()
        * 2.0
        / (mf * mf);
    Ok((abs_dev - 0.5 * pair).max(0.0))
}

/// Mean CRPS over years; columns of `draws` are years.
pub fn crps_mean(draws: &DMatrix<f64>, observed: &[f64]) -> Result<f64> {
    check_same_len(draws.ncols(), observed.len())?;
    let mut total = 0.0;
    for (c, &y) in draws.column_iter().zip(observed) {
        total += crps_sample(c.as_slice(), y)?;
    }
    Ok(total / observed.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub sq_bias: f64,
    pub variance: f64,
    pub rmse: f64,
    pub ecp95: f64,
    pub ecp80: f64,
    pub is95: f64,
    pub is80: f64,
    pub crps: f64,
}

impl ValidationReport {
    pub const COLUMNS: [&'static str; 8] =
        ["sq_bias", "variance", "rmse", "ecp95", "ecp80", "is95", "is80", "crps"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.sq_bias,
            self.variance,
            self.rmse,
            self.ecp95,
            self.ecp80,
            self.is95,
            self.is80,
            self.crps,
        ]
    }
}

/// All scores for latent draws (rows) against observations (columns).
pub fn validate(draws: &DMatrix<f64>, observed: &[f64]) -> Result<ValidationReport> {
    check_same_len(draws.ncols(), observed.len())?;
    let means: Vec<f64> = draws.column_iter().map(|c| c.mean()).collect();
    let pm = point_metrics(&means, observed)?;
    Ok(ValidationReport {
        sq_bias: pm.sq_bias,
        variance: pm.variance,
        rmse: pm.rmse,
        ecp95: ecp(draws, observed, 0.95)?,
        ecp80: ecp(draws, observed, 0.80)?,
        is95: interval_score(draws, observed, 0.95)?,
        is80: interval_score(draws, observed, 0.80)?,
        crps: crps_mean(draws, observed)?,
    })
}

fn check_chains(lengths: impl Iterator<Item = usize>) -> Result<usize> {
    let lengths: Vec<usize> = lengths.collect();
    if lengths.len() < 2 {
        return Err(Error::Config(format!(
            "scale reduction needs at least two chains, got {}",
            lengths.len()
        )));
    }
    let n = lengths[0];
    if lengths.iter().any(|&l| l != n) {
        return Err(Error::Shape(format!("chains have unequal lengths {lengths:?}")));
    }
    if n < MIN_CHAIN_LENGTH {
        return Err(Error::InsufficientSample(format!(
            "chains of length {n}, need {MIN_CHAIN_LENGTH}"
        )));
    }
    Ok(n)
}

/// Gelman–Rubin potential scale reduction factor `sqrt(V / W)` with
/// `V = (n-1)/n W + B/n`.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains.iter().map(Vec::len))? as f64;
    let means: Vec<f64> = chains.iter().map(|c| stats::mean(c)).collect();
    let w = chains.iter().map(|c| stats::sample_variance(c)).sum::<f64>() / chains.len() as f64;
    let b_over_n = stats::sample_variance(&means);
    if !(w > 0.0) {
        return Err(Error::DegenerateInput("chains have zero within-chain variance".into()));
    }
    let v = (n - 1.0) / n * w + b_over_n;
    Ok((v / w).sqrt())
}

/// Brooks–Gelman multivariate factor
/// `(n-1)/n + (m+1)/m * lambda_max(W^{-1} B / n)`; each chain is `n x p`.
pub fn psrf_multivariate(chains: &[DMatrix<f64>]) -> Result<f64> {
    let n = check_chains(chains.iter().map(DMatrix::nrows))?;
    let p = chains[0].ncols();
    if chains.iter().any(|c| c.ncols() != p) || p == 0 {
        return Err(Error::Shape("chains must share a positive parameter count".into()));
    }
    let m = chains.len() as f64;
    let nf = n as f64;
    let mut w = DMatrix::<f64>::zeros(p, p);
    let mut means = DMatrix::<f64>::zeros(chains.len(), p);
    for (k, c) in chains.iter().enumerate() {
        let mu = c.row_mean();
        means.row_mut(k).copy_from(&mu);
        let centered = DMatrix::from_fn(n, p, |i, j| c[(i, j)] - mu[j]);
        w += centered.transpose() * centered / (nf - 1.0);
    }
    w /= m;
    let grand = means.row_mean();
    let dm = DMatrix::from_fn(chains.len(), p, |i, j| means[(i, j)] - grand[j]);
    let b_over_n = dm.transpose() * dm / (m - 1.0);

    let chol = w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateInput("within-chain covariance is singular".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalDegeneracy("cannot invert within-chain factor".into()))?;
    let mut sym = &linv * b_over_n * linv.transpose();
    sym = (&sym + sym.transpose()) * 0.5;
    let lambda = SymmetricEigen::new(sym).eigenvalues.max();
    Ok((nf - 1.0) / nf + (m + 1.0) / m * lambda)
}

/// Pooled TCR draws with summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TcrDensity {
    pub draws: Vec<f64>,
    pub median: f64,
    pub ci95: (f64, f64),
    pub scenario_mix: Vec<(String, f64)>,
}

/// `beta3 * ln 2 / sd(log_c)` elementwise.
pub fn tcr_transform(beta3: &[f64], log_c: &[f64]) -> Result<Vec<f64>> {
    if log_c.len() < 2 {
        return Err(Error::InsufficientSample("log C needs two values".into()));
    }
    let sd = stats::sample_sd(log_c);
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput("log C is constant".into()));
    }
    let k = std::f64::consts::LN_2 / sd;
    Ok(beta3.iter().map(|b| b * k).collect())
}

/// Per-scenario counts summing to `total` by the largest-remainder rule.
pub fn mixture_counts(weights: &[f64], total: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let short = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (raw[a] - raw[a].floor(), raw[b] - raw[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().filter(|&&i| weights[i] > 0.0).take(short) {
        counts[i] += 1;
    }
    counts
}

/// Weighted mixture of per-scenario TCR posteriors.
///
/// The pooled size defaults to the total draw count of the scenarios with
/// positive weight. A scenario whose share equals its own draw count
/// contributes all its draws in order; otherwise its share is resampled with
/// replacement from a stream seeded by `seed`.
pub fn tcr_density(
    beta3_by_scenario: &IndexMap<String, Vec<f64>>,
    weights: &IndexMap<String, f64>,
    log_c: &[f64],
    size: Option<usize>,
    seed: u64,
) -> Result<TcrDensity> {
    let mut mix = Vec::new();
    for (label, &w) in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::ParameterDomain(format!("weight {w} for `{label}` is negative")));
        }
        if !beta3_by_scenario.contains_key(label) {
            return Err(Error::Config(format!("no draws for weighted scenario `{label}`")));
        }
        mix.push((label.clone(), w));
    }
    let sum: f64 = mix.iter().map(|(_, w)| w).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::ParameterDomain(format!("mixture weights sum to {sum}, not 1")));
    }
    let active: Vec<&(String, f64)> = mix.iter().filter(|(_, w)| *w > 0.0).collect();
    for (label, _) in &active {
        if beta3_by_scenario[label].is_empty() {
            return Err(Error::InsufficientSample(format!("scenario `{label}` has no draws")));
        }
    }
    let total = size.unwrap_or_else(|| active.iter().map(|(l, _)| beta3_by_scenario[l].len()).sum());
    if total == 0 {
        return Err(Error::InsufficientSample("empty TCR draw set".into()));
    }
    let counts = mixture_counts(&mix.iter().map(|(_, w)| *w).collect::<Vec<_>>(), total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pooled = Vec::with_capacity(total);
    for ((label, _), count) in mix.iter().zip(counts) {
        let src = &beta3_by_scenario[label];
        if count == src.len() {
            pooled.extend_from_slice(src);
        } else {
            pooled.extend((0..count).map(|_| *src.choose(&mut rng).expect("nonempty")));
        }
    }
    let draws = tcr_transform(&pooled, log_c)?;
    let s = stats::sorted(&draws);
    Ok(TcrDensity {
        median: stats::quantile_sorted(&s, 0.5),
        ci95: (stats::quantile_sorted(&s, 0.025), stats::quantile_sorted(&s, 0.975)),
        draws,
        scenario_mix: mix,
    })
}
