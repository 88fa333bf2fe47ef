//! Hierarchical Bayesian temperature reconstruction with white, AR(1) and
//! fractional Gaussian noise error models.
//!
//! The numeric kernels (autocovariances, Toeplitz likelihoods, spectra,
//! scoring rules) are generic over [`Real`] so they run in `f32` or `f64`;
//! the sampler, hypothesis tests and data plumbing work in `f64`. The type
//! aliases below fix the common `f64` instantiations.

pub mod error;
pub mod linalg;
pub mod memtest;
pub mod noise;
pub mod reduction;
pub mod sampler;
pub mod scalar;
pub mod spectral;
pub mod stats;
pub mod synthetic;
pub mod validation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type NoiseModel64 = noise::NoiseModel<f64>;
pub type Acvf64 = noise::AcvfSequence<f64>;
pub type Spectrum64 = spectral::SpectrumEstimate<f64>;
