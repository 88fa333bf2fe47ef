//! Metropolis–Hastings with a truncated-normal random walk on an interval.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;

/// Random-walk proposal `N(x, step^2)` truncated to the open interval
/// `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedWalk {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

fn std_normal() -> Normal {
    Normal::standard()
}

impl TruncatedWalk {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        assert!(lo < hi && step > 0.0, "invalid truncated walk");
        TruncatedWalk { lo, hi, step }
    }

    /// Normalizing mass `Phi((hi - x)/s) - Phi((lo - x)/s)` of the proposal
    /// centered at `x`.
    pub fn mass(&self, x: f64) -> f64 {
        let n = std_normal();
        n.cdf((self.hi - x) / self.step) - n.cdf((self.lo - x) / self.step)
    }

    /// `ln q(x | x_new) - ln q(x_new | x)`; the Gaussian kernels cancel.
    pub fn log_hastings(&self, x: f64, x_new: f64) -> f64 {
        self.mass(x).ln() - self.mass(x_new).ln()
    }

    pub fn propose<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let n = std_normal();
        let a = n.cdf((self.lo - x) / self.step);
        let b = n.cdf((self.hi - x) / self.step);
        loop {
            let u = a + (b - a) * rng.random::<f64>();
            let y = x + self.step * n.inverse_cdf(u);
            if y > self.lo && y < self.hi {
                return y;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub value: f64,
    pub log_target: f64,
    pub accepted: bool,
    pub log_ratio: f64,
}

/// Log acceptance ratio of moving from `x` to `x_new`.
pub fn log_acceptance(walk: &TruncatedWalk, x: f64, log_x: f64, x_new: f64, log_new: f64) -> f64 {
    log_new - log_x + walk.log_hastings(x, x_new)
}

/// One MH step from `x` whose log target is `log_x`.
pub fn mh_step<R: Rng + ?Sized>(
    walk: &TruncatedWalk,
    x: f64,
    log_x: f64,
    mut log_target: impl FnMut(f64) -> Result<f64>,
    rng: &mut R,
) -> Result<MhOutcome> {
    let x_new = walk.propose(x, rng);
    let log_new = log_target(x_new)?;
    let log_ratio = log_acceptance(walk, x, log_x, x_new, log_new);
    let accepted = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    Ok(if accepted {
        MhOutcome { value: x_new, log_target: log_new, accepted, log_ratio }
    } else {
        MhOutcome { value: x, log_target: log_x, accepted, log_ratio }
    })
}
