//! Periodogram and adaptive sine-multitaper spectral estimates, with the
//! log–log slope regression used to screen residuals for long memory.
//!
//! Both estimators are evaluated at the Fourier frequencies `j / n`,
//! `j = 1..=n/2`, in cycles per sample, and share one normalization:
//!
//! ```text
//! I(j/n) = | sum_t w_t (x_t - mean) exp(-2 pi i j t / n) |^2
//! ```
//!
//! with `w_t = 1/sqrt(n)` for the periodogram and the orthonormal sine taper
//! for each multitaper eigenspectrum. White noise of variance `s^2` therefore
//! has expected ordinates `s^2`, and the periodogram ordinates over
//! `j = 1..n-1` sum to `(n - 1) s^2` exactly, so the positive-frequency half
//! carries about `(n - 1) s^2 / 2`.

use rustfft::num_complex::Complex;
use rustfft::{FftNum, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Taper count used when the caller does not choose one.
pub const DEFAULT_TAPERS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Periodogram,
    Multitaper,
}

impl SpectrumMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumMethod::Periodogram => "periodogram",
            SpectrumMethod::Multitaper => "multitaper",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate<T> {
    pub frequencies: Vec<T>,
    pub power: Vec<T>,
    pub method: SpectrumMethod,
    /// Number of tapers, `None` for the periodogram.
    pub taper_count: Option<usize>,
}

impl<T: Real> SpectrumEstimate<T> {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Ordinary least-squares line through `(log f, log power)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit<T> {
    pub slope: T,
    pub intercept: T,
    /// `(1 - slope) / 2`, the Hurst parameter implied by `f ~ lambda^{1-2H}`.
    pub implied_hurst: T,
    pub frequencies_used: usize,
}

fn centered<T: Real>(x: &[T]) -> Result<Vec<T>> {
    if x.len() < 8 {
        return Err(Error::DegenerateInput(format!(
            "spectral estimation needs at least 8 observations, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("series contains non-finite values".into()));
    }
    let mean = crate::stats::mean(x);
    let out: Vec<T> = x.iter().map(|&v| v - mean).collect();
    if out.iter().all(|&v| v == T::zero()) {
        return Err(Error::DegenerateInput("constant series has no spectrum".into()));
    }
    Ok(out)
}

fn fourier_frequencies<T: Real>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    (1..=n / 2).map(|j| T::from_usize_lossy(j) / nf).collect()
}

/// `|DFT(w * x)|^2` at `j = 1..=n/2`.
fn tapered_power<T: Real + FftNum>(x: &[T], taper: impl Fn(usize) -> T, planner: &mut FftPlanner<T>) -> Vec<T> {
    let n = x.len();
    let mut buf: Vec<Complex<T>> = x
        .iter()
        .enumerate()
        .map(|(t, &v)| Complex::new(v * taper(t), T::zero()))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let tiny = T::min_positive_value();
    buf[1..=n / 2].iter().map(|c| (c.re * c.re + c.im * c.im).max(tiny)).collect()
}

/// Raw periodogram of the mean-removed series.
pub fn periodogram<T: Real + FftNum>(x: &[T]) -> Result<SpectrumEstimate<T>> {
    let xc = centered(x)?;
    let n = xc.len();
    let w = T::one() / T::from_usize_lossy(n).sqrt();
    let mut planner = FftPlanner::new();
    let power = tapered_power(&xc, |_| w, &mut planner);
    Ok(SpectrumEstimate {
        frequencies: fourier_frequencies(n),
        power,
        method: SpectrumMethod::Periodogram,
        taper_count: None,
    })
}

/// Orthonormal sine taper `k` (1-based) of length `n` evaluated at `t`.
pub fn sine_taper<T: Real>(n: usize, k: usize, t: usize) -> T {
    let np1 = T::from_usize_lossy(n + 1);
    let arg = T::PI() * T::from_usize_lossy(k) * T::from_usize_lossy(t + 1) / np1;
    (T::lit(2.0) / np1).sqrt() * arg.sin()
}

/// Fraction of each sine taper's energy inside the half-bandwidth
/// `W = (K + 1) / (2 (n + 1))`, from the taper autocorrelation.
fn concentrations<T: Real + FftNum>(n: usize, tapers: usize, planner: &mut FftPlanner<T>) -> Vec<T> {
    let w = T::from_usize_lossy(tapers + 1) / (T::lit(2.0) * T::from_usize_lossy(n + 1));
    let m = (2 * n).next_power_of_two();
    let two_pi_w = T::lit(2.0) * T::PI() * w;
    (1..=tapers)
        .map(|k| {
            let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
            for (t, b) in buf.iter_mut().take(n).enumerate() {
                b.re = sine_taper(n, k, t);
            }
            planner.plan_fft_forward(m).process(&mut buf);
            for b in buf.iter_mut() {
                *b = Complex::new(b.re * b.re + b.im * b.im, T::zero());
            }
            planner.plan_fft_inverse(m).process(&mut buf);
            let scale = T::one() / T::from_usize_lossy(m);
            let mut lambda = T::lit(2.0) * w * buf[0].re * scale;
            for lag in 1..n {
                let r = buf[lag].re * scale;
                let l = T::from_usize_lossy(lag);
                lambda = lambda + T::lit(2.0) * r * (two_pi_w * l).sin() / (T::PI() * l);
            }
            lambda.max(T::lit(1e-12)).min(T::one())
        })
        .collect()
}

/// Adaptive multitaper estimate with `tapers` orthonormal sine tapers and
/// Thomson's iterative weights.
pub fn multitaper<T: Real + FftNum>(x: &[T], tapers: usize) -> Result<SpectrumEstimate<T>> {
    let xc = centered(x)?;
    let n = xc.len();
    if tapers == 0 || tapers > n / 4 {
        return Err(Error::ParameterDomain(format!(
            "taper count {tapers} must be in 1..={} for n = {n}",
            n / 4
        )));
    }
    let mut planner = FftPlanner::new();
    let eigen: Vec<Vec<T>> = (1..=tapers)
        .map(|k| tapered_power(&xc, |t| sine_taper(n, k, t), &mut planner))
        .collect();
    let lambda = concentrations(n, tapers, &mut planner);
    let sigma2 = xc.iter().fold(T::zero(), |a, &v| a + v * v) / T::from_usize_lossy(n);
    let nf = eigen[0].len();

    let mut power: Vec<T> = if tapers >= 2 {
        (0..nf).map(|j| (eigen[0][j] + eigen[1][j]) * T::lit(0.5)).collect()
    } else {
        eigen[0].clone()
    };
    for _ in 0..100 {
        let mut max_change = T::zero();
        for j in 0..nf {
            let s = power[j];
            let mut num = T::zero();
            let mut den = T::zero();
            for k in 0..tapers {
                let d = lambda[k].sqrt() * s / (lambda[k] * s + (T::one() - lambda[k]) * sigma2);
                let d2 = d * d;
                num = num + d2 * eigen[k][j];
                den = den + d2;
            }
            let updated = num / den;
            let change = num_traits::Float::abs((updated - s) / s);
            if change > max_change {
                max_change = change;
            }
            power[j] = updated.max(T::min_positive_value());
        }
        if max_change < T::lit(1e-10) {
            break;
        }
    }
    Ok(SpectrumEstimate {
        frequencies: fourier_frequencies(n),
        power,
        method: SpectrumMethod::Multitaper,
        taper_count: Some(tapers),
    })
}

/// Regresses log power on log frequency over the lowest `freq_fraction` of
/// the available frequencies.
pub fn loglog_slope<T: Real>(spec: &SpectrumEstimate<T>, freq_fraction: T) -> Result<SlopeFit<T>> {
    if !(freq_fraction > T::zero() && freq_fraction <= T::one()) {
        return Err(Error::ParameterDomain(format!(
            "frequency fraction {freq_fraction} must be in (0, 1]"
        )));
    }
    let keep = (freq_fraction * T::from_usize_lossy(spec.len())).ceil().to_usize().unwrap_or(0);
    let keep = keep.min(spec.len());
    if keep < 8 {
        return Err(Error::DegenerateInput(format!(
            "log-log regression needs at least 8 frequencies, {keep} retained"
        )));
    }
    let lx: Vec<T> = spec.frequencies[..keep].iter().map(|f| f.ln()).collect();
    let ly: Vec<T> = spec.power[..keep].iter().map(|p| p.ln()).collect();
    let mx = crate::stats::mean(&lx);
    let my = crate::stats::mean(&ly);
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (a, b) in lx.iter().zip(&ly) {
        sxx = sxx + (*a - mx) * (*a - mx);
        sxy = sxy + (*a - mx) * (*b - my);
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        implied_hurst: (T::one() - slope) * T::lit(0.5),
        frequencies_used: keep,
    })
}
