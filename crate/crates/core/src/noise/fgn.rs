//! Exact simulation of stationary Gaussian noise.
//!
//! fGn paths come from circulant embedding of the autocovariance (the
//! Davies–Harte construction); AR(1) paths from the stationary recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Memory, NoiseModel};
use crate::error::{Error, Result};

/// Square-rooted circulant eigenvalues for one `(model, n)` pair, reusable
/// across many draws.
#[derive(Debug, Clone)]
pub struct CirculantEmbedding {
    n: usize,
    sqrt_eig: Vec<f64>,
}

impl CirculantEmbedding {
    /// Embeds the first `n` lags of the unit-scale `memory` autocorrelation in
    /// a circulant of power-of-two size `m >= 2(n-1)`.
    pub fn new(memory: &Memory<f64>, n: usize) -> Result<Self> {
        memory.validate()?;
        if n == 0 {
            return Err(Error::ParameterDomain("path length must be positive".into()));
        }
        let m = (2 * (n - 1)).max(2).next_power_of_two();
        let half = m / 2;
        let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=half {
            let g = memory.autocorrelation(k);
            row[k] = Complex::new(g, 0.0);
            if k > 0 && k < half {
                row[m - k] = Complex::new(g, 0.0);
            }
        }
        FftPlanner::new().plan_fft_forward(m).process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        let mut sqrt_eig = Vec::with_capacity(m);
        for (k, c) in row.iter().enumerate() {
            let lambda = c.re;
            if lambda < -1e-10 * max {
                return Err(Error::Embedding(format!(
                    "circulant eigenvalue {lambda:.3e} at index {k} is negative"
                )));
            }
            sqrt_eig.push((lambda.max(0.0) / m as f64).sqrt());
        }
        Ok(CirculantEmbedding { n, sqrt_eig })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// One unit-variance path of length `n`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.sqrt_eig.len();
        let mut w: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut w);
        w.iter().take(self.n).map(|c| c.re).collect()
    }
}

/// Unit-scale fGn of length `n`, deterministic in `seed`.
pub fn sample_fgn(hurst: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_fgn_with(hurst, n, &mut rng)
}

pub fn sample_fgn_with<R: Rng + ?Sized>(hurst: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    Ok(CirculantEmbedding::new(&Memory::Fgn { hurst }, n)?.sample(rng))
}

/// A path of length `n` from `model` (including its scale).
pub fn sample_noise<R: Rng + ?Sized>(model: &NoiseModel<f64>, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    let unit = match model.memory {
        Memory::White => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        Memory::Ar1 { phi } => {
            let innov = (1.0 - phi * phi).sqrt();
            let mut out = Vec::with_capacity(n);
            let mut prev: f64 = rng.sample(StandardNormal);
            for t in 0..n {
                if t > 0 {
                    let z: f64 = rng.sample(StandardNormal);
                    prev = phi * prev + innov * z;
                }
                out.push(prev);
            }
            out
        }
        Memory::Fgn { .. } => {
            if n == 0 {
                Vec::new()
            } else {
                CirculantEmbedding::new(&model.memory, n)?.sample(rng)
            }
        }
    };
    Ok(unit.into_iter().map(|v| v * model.scale).collect())
}
