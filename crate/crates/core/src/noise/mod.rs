//! Stationary zero-mean error processes: white noise, AR(1) and fractional
//! Gaussian noise.
//!
//! Every model is parameterized by its *marginal* standard deviation, so the
//! unit-scale process has variance exactly one at lag zero.

mod fgn;
mod levinson;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

pub use fgn::{sample_fgn, sample_fgn_with, sample_noise, CirculantEmbedding};
pub use levinson::{loglik_durbin_levinson, partial_autocorrelations, LevinsonFactor};

/// Label for the three error families, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Ar1,
    Fgn,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Ar1 => "ar1",
            NoiseKind::Fgn => "fgn",
        }
    }

    /// Open interval of admissible memory parameters, `None` for white noise.
    pub fn param_bounds(self) -> Option<(f64, f64)> {
        match self {
            NoiseKind::White => None,
            NoiseKind::Ar1 => Some((-1.0, 1.0)),
            NoiseKind::Fgn => Some((0.0, 1.0)),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "white" | "none" => Ok(NoiseKind::White),
            "ar1" | "ar(1)" => Ok(NoiseKind::Ar1),
            "fgn" => Ok(NoiseKind::Fgn),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// Memory structure of a unit-variance error process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Memory<T> {
    White,
    /// AR(1) with lag-one coefficient `phi`, |phi| < 1.
    Ar1 { phi: T },
    /// Fractional Gaussian noise with Hurst parameter in (0, 1).
    Fgn { hurst: T },
}

impl<T: Real> Memory<T> {
    pub fn kind(&self) -> NoiseKind {
        match self {
            Memory::White => NoiseKind::White,
            Memory::Ar1 { .. } => NoiseKind::Ar1,
            Memory::Fgn { .. } => NoiseKind::Fgn,
        }
    }

    pub fn param(&self) -> Option<T> {
        match *self {
            Memory::White => None,
            Memory::Ar1 { phi } => Some(phi),
            Memory::Fgn { hurst } => Some(hurst),
        }
    }

    /// Builds the memory structure of `kind` with parameter `param`
    /// (ignored for white noise).
    pub fn from_kind(kind: NoiseKind, param: T) -> Result<Self> {
        let m = match kind {
            NoiseKind::White => Memory::White,
            NoiseKind::Ar1 => Memory::Ar1 { phi: param },
            NoiseKind::Fgn => Memory::Fgn { hurst: param },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Memory::White => Ok(()),
            Memory::Ar1 { phi } => {
                if phi.is_finite() && phi.abs() < T::one() {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("AR(1) coefficient {phi} outside (-1, 1)")))
                }
            }
            Memory::Fgn { hurst } => {
                if hurst > T::zero() && hurst < T::one() {
                    Ok(())
                } else {
                    Err(Error::ParameterDomain(format!("Hurst parameter {hurst} outside (0, 1)")))
                }
            }
        }
    }

    /// Autocorrelation at lag `k` of the unit-variance process.
    pub fn autocorrelation(&self, k: usize) -> T {
        match *self {
            Memory::White => {
                if k == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Memory::Ar1 { phi } => phi.powi(k as i32),
            Memory::Fgn { hurst } => fgn_autocorrelation(hurst, k),
        }
    }
}

/// Unit-variance fGn autocovariance
/// `0.5 (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H})`.
pub fn fgn_autocorrelation<T: Real>(hurst: T, k: usize) -> T {
    if k == 0 {
        return T::one();
    }
    let two_h = hurst + hurst;
    let kf = T::from_usize_lossy(k);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    half * ((kf + T::one()).powf(two_h) - two * kf.powf(two_h) + (kf - T::one()).powf(two_h))
}

/// A stationary zero-mean Gaussian error process with marginal standard
/// deviation `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    pub memory: Memory<T>,
    pub scale: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn new(memory: Memory<T>, scale: T) -> Result<Self> {
        let model = NoiseModel { memory, scale };
        model.validate()?;
        Ok(model)
    }

    pub fn white(scale: T) -> Result<Self> {
        Self::new(Memory::White, scale)
    }

    pub fn ar1(phi: T, scale: T) -> Result<Self> {
        Self::new(Memory::Ar1 { phi }, scale)
    }

    pub fn fgn(hurst: T, scale: T) -> Result<Self> {
        Self::new(Memory::Fgn { hurst }, scale)
    }

    pub fn kind(&self) -> NoiseKind {
        self.memory.kind()
    }

    pub fn validate(&self) -> Result<()> {
        self.memory.validate()?;
        if !(self.scale > T::zero() && self.scale.is_finite()) {
            return Err(Error::ParameterDomain(format!("scale {} must be positive", self.scale)));
        }
        Ok(())
    }

    pub fn variance(&self) -> T {
        self.scale * self.scale
    }
}

/// Autocovariance values at lags `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct AcvfSequence<T> {
    values: Vec<T>,
}

impl<T: Real> AcvfSequence<T> {
    /// Wraps raw autocovariances; requires a positive finite lag-zero value.
    /// Positive semi-definiteness is checked lazily by the Levinson recursion.
    pub fn new(values: Vec<T>) -> Result<Self> {
        match values.first() {
            Some(&g0) if g0 > T::zero() && g0.is_finite() => {}
            _ => {
                return Err(Error::ParameterDomain(
                    "autocovariance at lag 0 must be positive".into(),
                ))
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("non-finite autocovariance".into()));
        }
        Ok(AcvfSequence { values })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lag(&self, k: usize) -> T {
        self.values[k]
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Every lag multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: T) -> Self {
        AcvfSequence { values: self.values.iter().map(|&v| v * factor).collect() }
    }

    /// Adds `amount` to the lag-zero value.
    pub(crate) fn with_nugget(&self, amount: T) -> Self {
        let mut values = self.values.clone();
        values[0] = values[0] + amount;
        AcvfSequence { values }
    }

    /// The symmetric Toeplitz matrix of the first `n` lags.
    pub fn toeplitz(&self, n: usize) -> DMatrix<T> {
        assert!(n <= self.values.len(), "toeplitz order exceeds available lags");
        DMatrix::from_fn(n, n, |i, j| self.values[i.abs_diff(j)])
    }
}

/// Autocovariance of `model` at lags `0..=max_lag`.
pub fn acvf<T: Real>(model: &NoiseModel<T>, max_lag: usize) -> Result<AcvfSequence<T>> {
    model.validate()?;
    let var = model.variance();
    let values = (0..=max_lag).map(|k| var * model.memory.autocorrelation(k)).collect();
    AcvfSequence::new(values)
}

/// Dense `n x n` covariance matrix of `model`, checked by a Cholesky
/// factorization. On failure the diagonal is inflated once by
/// `1e-10 * gamma(0)`; a second failure is reported as degenerate.
pub fn covariance_matrix<T: Real>(model: &NoiseModel<T>, n: usize) -> Result<DMatrix<T>> {
    if n == 0 {
        return Err(Error::ParameterDomain("covariance order must be at least 1".into()));
    }
    let gamma = acvf(model, n - 1)?;
    let mut matrix = gamma.toeplitz(n);
    if linalg::cholesky(&matrix).is_some() {
        return Ok(matrix);
    }
    let jitter = T::lit(1e-10) * gamma.lag(0);
    log::warn!("covariance factorization failed; retrying with diagonal jitter {jitter}");
    for i in 0..n {
        matrix[(i, i)] = matrix[(i, i)] + jitter;
    }
    if linalg::cholesky(&matrix).is_some() {
        Ok(matrix)
    } else {
        Err(Error::NumericalDegeneracy(format!(
            "covariance matrix of order {n} is not positive definite after jitter"
        )))
    }
}
