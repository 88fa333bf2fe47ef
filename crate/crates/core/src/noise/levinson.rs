//! Durbin–Levinson recursion for symmetric positive-definite Toeplitz systems.

use nalgebra::DMatrix;

use super::AcvfSequence;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One pass of the recursion. `visit(t, phi_t, v_t)` is called with the
/// order-`t` predictor coefficients `phi_t[0..t]` (coefficient of lag `j+1`
/// at index `j`) and the order-`t` innovation variance.
fn recurse<T: Real>(gamma: &[T], n: usize, mut visit: impl FnMut(usize, &[T], T)) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    let mut phi = vec![T::zero(); n];
    let mut prev = vec![T::zero(); n];
    let mut v = gamma[0];
    visit(0, &phi[..0], v);
    for t in 1..n {
        let mut num = gamma[t];
        for j in 1..t {
            num = num - phi[j - 1] * gamma[t - j];
        }
        let kappa = num / v;
        if !(kappa.abs() < T::one()) || !kappa.is_finite() {
            return Err(Error::NumericalDegeneracy(format!(
                "partial autocorrelation {kappa} at lag {t} is not inside (-1, 1)"
            )));
        }
        prev[..t - 1].copy_from_slice(&phi[..t - 1]);
        for j in 1..t {
            phi[j - 1] = prev[j - 1] - kappa * prev[t - j - 1];
        }
        phi[t - 1] = kappa;
        v = v * (T::one() - kappa * kappa);
        if !(v > T::zero()) {
            return Err(Error::NumericalDegeneracy(format!(
                "innovation variance vanished at lag {t}"
            )));
        }
        visit(t, &phi[..t], v);
    }
    Ok(())
}

/// Runs `f` on the autocovariance and, if it reports degeneracy, once more
/// with `1e-10 * gamma(0)` added at lag zero.
fn with_jitter<T: Real, R>(
    acvf: &AcvfSequence<T>,
    mut f: impl FnMut(&AcvfSequence<T>) -> Result<R>,
) -> Result<R> {
    match f(acvf) {
        Err(Error::NumericalDegeneracy(first)) => {
            let nugget = T::lit(1e-10) * acvf.lag(0);
            log::debug!("Levinson recursion failed ({first}); retrying with nugget {nugget}");
            f(&acvf.with_nugget(nugget))
        }
        other => other,
    }
}

/// Partial autocorrelations at lags `1..len`; all lie strictly inside
/// (-1, 1) exactly when the autocovariance is positive definite.
pub fn partial_autocorrelations<T: Real>(acvf: &AcvfSequence<T>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(acvf.len().saturating_sub(1));
    recurse(acvf.as_slice(), acvf.len(), |t, phi, _| {
        if t > 0 {
            out.push(phi[t - 1]);
        }
    })?;
    Ok(out)
}

/// Exact Gaussian log-density of `x` under a zero-mean stationary law with
/// autocovariance `acvf`, via one-step prediction errors in `O(n^2)` time
/// and `O(n)` memory.
pub fn loglik_durbin_levinson<T: Real>(x: &[T], acvf: &AcvfSequence<T>) -> Result<T> {
    let n = x.len();
    if n > acvf.len() {
        return Err(Error::Shape(format!(
            "series of length {n} needs {n} autocovariance lags, got {}",
            acvf.len()
        )));
    }
    let ln_2pi = (T::PI() + T::PI()).ln();
    let half = T::lit(0.5);
    with_jitter(acvf, |gamma| {
        let mut total = T::zero();
        recurse(gamma.as_slice(), n, |t, phi, v| {
            let mut err = x[t];
            for (j, &c) in phi.iter().enumerate() {
                err = err - c * x[t - 1 - j];
            }
            total = total - half * (ln_2pi + v.ln() + err * err / v);
        })?;
        Ok(total)
    })
}

/// The order-`(n-1)` Levinson solution of an `n x n` Toeplitz covariance:
/// innovation variances for every order plus the final predictor. Enough to
/// evaluate the log-determinant and the explicit inverse in `O(n^2)`.
#[derive(Debug, Clone)]
pub struct LevinsonFactor<T> {
    innovations: Vec<T>,
    predictor: Vec<T>,
}

impl<T: Real> LevinsonFactor<T> {
    pub fn new(acvf: &AcvfSequence<T>, n: usize) -> Result<Self> {
        if n == 0 || n > acvf.len() {
            return Err(Error::Shape(format!(
                "factor order {n} must be in 1..={}",
                acvf.len()
            )));
        }
        with_jitter(acvf, |gamma| {
            let mut innovations = Vec::with_capacity(n);
            let mut predictor = Vec::new();
            recurse(gamma.as_slice(), n, |t, phi, v| {
                innovations.push(v);
                if t == n - 1 {
                    predictor = phi.to_vec();
                }
            })?;
            Ok(LevinsonFactor { innovations, predictor })
        })
    }

    pub fn order(&self) -> usize {
        self.innovations.len()
    }

    /// Prediction-error variances for orders `0..n`.
    pub fn innovations(&self) -> &[T] {
        &self.innovations
    }

    pub fn log_det(&self) -> T {
        self.innovations.iter().fold(T::zero(), |acc, v| acc + v.ln())
    }

    /// Explicit inverse via the Gohberg–Semencul representation, filled with
    /// Trench's diagonal recursion in `O(n^2)`.
    pub fn inverse(&self) -> DMatrix<T> {
        let n = self.order();
        let v = self.innovations[n - 1];
        // a = (1, -phi_1, ..., -phi_{n-1}); b = (0, -phi_{n-1}, ..., -phi_1)
        let mut a = vec![T::one(); n];
        let mut b = vec![T::zero(); n];
        for j in 1..n {
            a[j] = -self.predictor[j - 1];
            b[j] = -self.predictor[n - 1 - j];
        }
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            m[(0, j)] = a[j] / v;
        }
        for i in 1..n {
            for j in i..n {
                m[(i, j)] = m[(i - 1, j - 1)] + (a[i] * a[j] - b[i] * b[j]) / v;
            }
        }
        for i in 0..n {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        m
    }
}
