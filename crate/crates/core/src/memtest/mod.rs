//! Hypothesis tests for memory length and the local Whittle estimator of the
//! Hurst parameter.
//!
//! * [`robinson_test`]: `H = 0.5` against `H > 0.5`, from the asymptotic
//!   normality of the local Whittle estimate.
//! * [`beran_test`]: goodness of fit of a parametric spectral family (fGn,
//!   AR(1) or white noise) fitted by Whittle's method.
//! * [`davies_harte_test`]: the locally best invariant test of white noise
//!   against fGn with `H > 0.5`.
//!
//! Every statistic depends on the series only through ratios of quadratic
//! forms, so all tests are invariant to positive rescaling.

mod optimize;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::spectral;

pub use optimize::golden_section;

/// Search interval for Hurst-type parameters.
pub const HURST_BOUNDS: (f64, f64) = (0.01, 0.99);
/// Golden-section tolerance for all Whittle-type minimizations.
pub const WHITTLE_TOL: f64 = 1e-6;
/// Exponent of the default semiparametric bandwidth `m = floor(n^0.65)`.
pub const BANDWIDTH_EXPONENT: f64 = 0.65;
const AR1_BOUNDS: (f64, f64) = (-0.99, 0.99);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    /// Test name (`robinson`, `beran`, `davies-harte`).
    pub test: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Fitted memory parameter: the Hurst estimate, or the AR(1)
    /// coefficient when the null family is AR(1).
    pub estimate: Option<f64>,
    pub bandwidth: Option<usize>,
    pub null_model: String,
}

/// Default bandwidth `floor(n^0.65)`.
pub fn default_bandwidth(n: usize) -> usize {
    (n as f64).powf(BANDWIDTH_EXPONENT).floor() as usize
}

fn upper_tail(z: f64) -> f64 {
    Normal::standard().sf(z).clamp(0.0, 1.0)
}

/// Periodogram ordinates at `lambda_j = 2 pi j / n`, `j = 1..=n/2`,
/// normalized to unit mean.
fn normalized_periodogram(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = spectral::periodogram(x)?;
    let mean = spec.power.iter().sum::<f64>() / spec.len() as f64;
    let lambda = spec.frequencies.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
    let power = spec.power.iter().map(|p| p / mean).collect();
    Ok((lambda, power))
}

/// Local Whittle estimate of the Hurst parameter from the first `m`
/// periodogram ordinates.
///
/// Minimizes `R(H) = log(mean_j lambda_j^{2H-1} I_j) - (2H-1) mean_j log lambda_j`
/// by golden-section search on `(0.01, 0.99)`, then polishes the interior
/// optimum with Newton steps on `R'(H) = 0`.
pub fn local_whittle(x: &[f64], m: usize) -> Result<f64> {
    let n = x.len();
    let max_m = n.saturating_sub(1) / 2;
    if m < 2 || m > max_m {
        return Err(Error::ParameterDomain(format!("bandwidth {m} outside 2..={max_m} for n = {n}")));
    }
    let (lambda, power) = normalized_periodogram(x)?;
    let logs: Vec<f64> = lambda[..m].iter().map(|l| l.ln()).collect();
    let log_mean = logs.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = logs.iter().map(|l| l - log_mean).collect();
    let ords = &power[..m];

    // With centered log-frequencies the linear term cancels.
    let objective = |h: f64| {
        let e = 2.0 * h - 1.0;
        let s: f64 = centered.iter().zip(ords).map(|(c, i)| (e * c).exp() * i).sum();
        (s / m as f64).ln()
    };
    let mut h = golden_section(objective, HURST_BOUNDS.0, HURST_BOUNDS.1, WHITTLE_TOL);

    let bracket = (h - 10.0 * WHITTLE_TOL, h + 10.0 * WHITTLE_TOL);
    if bracket.0 > HURST_BOUNDS.0 && bracket.1 < HURST_BOUNDS.1 {
        for _ in 0..20 {
            let e = 2.0 * h - 1.0;
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for (c, i) in centered.iter().zip(ords) {
                let w = (e * c).exp() * i;
                s0 += w;
                s1 += c * w;
                s2 += c * c * w;
            }
            let mean1 = s1 / s0;
            let grad = 2.0 * mean1;
            let curv = 4.0 * (s2 / s0 - mean1 * mean1);
            if curv <= 0.0 {
                break;
            }
            let next = h - grad / curv;
            if !(next > bracket.0 && next < bracket.1) {
                break;
            }
            let done = (next - h).abs() < 1e-15;
            h = next;
            if done {
                break;
            }
        }
    }
    Ok(h)
}

/// Robinson's one-sided test of `H = 0.5` against `H > 0.5`: statistic
/// `2 sqrt(m) (H_hat - 0.5)` with an upper standard-normal tail p-value.
pub fn robinson_test(x: &[f64], m: usize) -> Result<TestResult> {
    let h = local_whittle(x, m)?;
    Ok(robinson_from_estimate(h, m))
}

pub(crate) fn robinson_from_estimate(h: f64, m: usize) -> TestResult {
    let statistic = 2.0 * (m as f64).sqrt() * (h - 0.5);
    TestResult {
        test: "robinson".into(),
        statistic,
        p_value: upper_tail(statistic),
        estimate: Some(h),
        bandwidth: Some(m),
        null_model: "fgn(H=0.5)".into(),
    }
}

/// Spectral density shape of fGn, up to an `H`-dependent constant:
/// `(1 - cos l) sum_k |l + 2 pi k|^{-2H-1}`, truncated at `|k| <= 50` with
/// an integral tail correction.
pub fn fgn_spectral_shape(lambda: f64, hurst: f64) -> f64 {
    const TERMS: i32 = 50;
    let a = 2.0 * hurst + 1.0;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut s = 0.0;
    for k in -TERMS..=TERMS {
        s += (lambda + two_pi * k as f64).abs().powf(-a);
    }
    let edge = two_pi * (TERMS as f64 + 0.5);
    s += ((edge + lambda).powf(1.0 - a) + (edge - lambda).powf(1.0 - a)) / (two_pi * (a - 1.0));
    (1.0 - lambda.cos()) * s
}

fn ar1_spectral_shape(lambda: f64, phi: f64) -> f64 {
    1.0 / (1.0 - 2.0 * phi * lambda.cos() + phi * phi)
}

/// Whittle fit with the scale profiled out:
/// `Q(theta) = log mean(I / g_theta) + mean log g_theta`.
fn whittle_fit(lambda: &[f64], power: &[f64], family: NoiseKind) -> Result<Option<f64>> {
    let shape = |l: f64, theta: f64| match family {
        NoiseKind::Fgn => fgn_spectral_shape(l, theta),
        NoiseKind::Ar1 => ar1_spectral_shape(l, theta),
        NoiseKind::White => 1.0,
    };
    let bounds = match family {
        NoiseKind::White => return Ok(None),
        NoiseKind::Fgn => HURST_BOUNDS,
        NoiseKind::Ar1 => AR1_BOUNDS,
    };
    let n = lambda.len() as f64;
    let mut non_finite = false;
    let theta = golden_section(
        |theta| {
            let (mut ratio, mut logs) = (0.0, 0.0);
            for (&l, &i) in lambda.iter().zip(power) {
                let g = shape(l, theta);
                ratio += i / g;
                logs += g.ln();
            }
            let q = (ratio / n).ln() + logs / n;
            if !q.is_finite() {
                non_finite = true;
                return f64::INFINITY;
            }
            q
        },
        bounds.0,
        bounds.1,
        WHITTLE_TOL,
    );
    if non_finite {
        return Err(Error::EstimationFailure(format!(
            "Whittle objective for the {family} family is not finite"
        )));
    }
    Ok(Some(theta))
}

/// Beran's goodness-of-fit test of a parametric spectral family.
///
/// With `y_j = I(lambda_j) / f(lambda_j; theta_hat)` over
/// `j = 1..=floor((n-1)/2)`, the statistic `T = A / B^2`,
/// `A = (4 pi / n) sum y_j^2`, `B = (4 pi / n) sum y_j`, satisfies
/// `sqrt(n) (T - 1/pi) -> N(0, 2 / pi^2)` under the null. Large values
/// indicate misfit, so the p-value is the upper normal tail of the
/// standardized statistic.
pub fn beran_test(x: &[f64], null_model: NoiseKind) -> Result<TestResult> {
    let n = x.len();
    if n < 64 {
        return Err(Error::InsufficientSample(format!("Beran's test needs n >= 64, got {n}")));
    }
    let (lambda, power) = normalized_periodogram(x)?;
    let keep = (n - 1) / 2;
    let (lambda, power) = (&lambda[..keep], &power[..keep]);
    let theta = whittle_fit(lambda, power, null_model)?;
    let ratios: Vec<f64> = lambda
        .iter()
        .zip(power)
        .map(|(&l, &i)| match (null_model, theta) {
            (NoiseKind::Fgn, Some(h)) => i / fgn_spectral_shape(l, h),
            (NoiseKind::Ar1, Some(phi)) => i / ar1_spectral_shape(l, phi),
            _ => i,
        })
        .collect();
    let pi = std::f64::consts::PI;
    let nf = n as f64;
    let a: f64 = 4.0 * pi / nf * ratios.iter().map(|y| y * y).sum::<f64>();
    let b: f64 = 4.0 * pi / nf * ratios.iter().sum::<f64>();
    let t = a / (b * b);
    let statistic = nf.sqrt() * (t - 1.0 / pi) / (2f64.sqrt() / pi);
    if !statistic.is_finite() {
        return Err(Error::EstimationFailure("Beran statistic is not finite".into()));
    }
    Ok(TestResult {
        test: "beran".into(),
        statistic,
        p_value: upper_tail(statistic),
        estimate: theta,
        bandwidth: None,
        null_model: null_model.as_str().into(),
    })
}

/// Derivative at `H = 1/2` of the unit fGn autocorrelation at lag `k`:
/// `(k+1) ln(k+1) - 2 k ln k + (k-1) ln(k-1)`.
pub fn fgn_correlation_slope(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let xlogx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };
    let k = k as f64;
    xlogx(k + 1.0) - 2.0 * xlogx(k) + xlogx(k - 1.0)
}

/// Davies and Harte's locally best invariant test of white noise against
/// fGn with `H > 0.5`.
///
/// With `e` the mean-removed series and `D` the Toeplitz matrix of
/// [`fgn_correlation_slope`], the statistic `S = e'De / e'e` is the score
/// for `H` at `1/2`. It is standardized with its exact null mean and
/// variance (a ratio of quadratic forms in the `n - 1` dimensional
/// residual space) and referred to the upper normal tail.
pub fn davies_harte_test(x: &[f64]) -> Result<TestResult> {
    let n = x.len();
    if n < 64 {
        return Err(Error::InsufficientSample(format!("Davies–Harte test needs n >= 64, got {n}")));
    }
    let mean = crate::stats::mean(x);
    let e: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = e.iter().map(|v| v * v).sum();
    if !(ss > 0.0) {
        return Err(Error::DegenerateInput("constant series".into()));
    }
    let slope: Vec<f64> = (0..n).map(fgn_correlation_slope).collect();

    let mut quad = 0.0;
    for k in 1..n {
        let lagged: f64 = (0..n - k).map(|t| e[t] * e[t + k]).sum();
        quad += 2.0 * slope[k] * lagged;
    }
    let s = quad / ss;

    // Row sums of D give 1'D1 and ||D1||^2.
    let mut prefix = vec![0.0; n + 1];
    for k in 1..n {
        prefix[k + 1] = prefix[k] + slope[k];
    }
    let mut one_d_one = 0.0;
    let mut d1_sq = 0.0;
    for i in 0..n {
        // sum over j != i of slope[|i - j|]
        let row = prefix[i + 1] + prefix[n - i];
        one_d_one += row;
        d1_sq += row * row;
    }
    let tr_d2: f64 = (1..n).map(|k| 2.0 * (n - k) as f64 * slope[k] * slope[k]).sum();
    let nf = n as f64;
    let nu = nf - 1.0;
    let tr_b = -one_d_one / nf;
    let tr_b2 = tr_d2 - 2.0 * d1_sq / nf + one_d_one * one_d_one / (nf * nf);
    let mean_s = tr_b / nu;
    let var_s = 2.0 * (tr_b2 - tr_b * tr_b / nu) / (nu * (nu + 2.0));
    if !(var_s > 0.0) {
        return Err(Error::EstimationFailure("null variance of the Davies–Harte statistic vanished".into()));
    }
    let statistic = (s - mean_s) / var_s.sqrt();
    Ok(TestResult {
        test: "davies-harte".into(),
        statistic,
        p_value: upper_tail(statistic),
        estimate: None,
        bandwidth: None,
        null_model: "fgn(H=0.5)".into(),
    })
}
