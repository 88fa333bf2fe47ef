//! Full conditional distributions of the two-level model, as pure functions
//! of the current parameters.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::noise::{acvf, LevinsonFactor, Memory, NoiseModel};

/// Inverse of a unit-variance error correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Precision {
    Identity(usize),
    Dense(DMatrix<f64>),
}

impl Precision {
    /// Inverse correlation of `n` consecutive values of `memory`.
    pub fn from_memory(memory: Memory<f64>, n: usize) -> Result<Self> {
        match memory {
            Memory::White => Ok(Precision::Identity(n)),
            _ => {
                let model = NoiseModel::new(memory, 1.0)?;
                let factor = LevinsonFactor::new(&acvf(&model, n.saturating_sub(1))?, n)?;
                Ok(Precision::Dense(factor.inverse()))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Precision::Identity(n) => *n,
            Precision::Dense(m) => m.nrows(),
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> DVector<f64> {
        match self {
            Precision::Identity(_) => DVector::from_column_slice(v),
            Precision::Dense(m) => m * DVector::from_column_slice(v),
        }
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Precision::Identity(_) => x.clone(),
            Precision::Dense(m) => m * x,
        }
    }

    /// `r' P r`.
    pub fn quad(&self, r: &[f64]) -> f64 {
        match self {
            Precision::Identity(_) => r.iter().map(|v| v * v).sum(),
            Precision::Dense(_) => self.mul_vec(r).iter().zip(r).map(|(a, b)| a * b).sum(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            Precision::Identity(_) => f64::from(u8::from(i == j)),
            Precision::Dense(m) => m[(i, j)],
        }
    }

    /// Sub-block on the given row and column indices.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.entry(rows[a], cols[b]))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Precision::Identity(n) => DMatrix::identity(*n, *n),
            Precision::Dense(m) => m.clone(),
        }
    }
}

/// A Gaussian in information form, `N(Q^{-1} b, Q^{-1})`.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GaussianConditional {
    pub fn from_information(precision: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        let sym = (&precision + precision.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone()).ok_or_else(|| {
            Error::NumericalDegeneracy(format!(
                "conditional precision of order {} is not positive definite",
                sym.nrows()
            ))
        })?;
        let mean = chol.solve(&rhs);
        Ok(GaussianConditional { mean, precision: sym, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `mean + L^{-T} z` with `Q = L L'` and `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let dev = self
            .chol
            .l_dirty()
            .tr_solve_lower_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        &self.mean + dev
    }
}

/// Conjugate update of `y = X c + sigma e`, `e ~ N(0, P^{-1})`, under the
/// prior `c ~ N(prior_mean, prior_var I)`. A design with no rows returns the
/// prior.
pub fn regression_conditional(
    design: &DMatrix<f64>,
    y: &[f64],
    precision: &Precision,
    sigma2: f64,
    prior_mean: &[f64],
    prior_var: f64,
) -> Result<GaussianConditional> {
    let p = design.ncols();
    if prior_mean.len() != p || design.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "design {}x{p}, response {}, prior mean {}",
            design.nrows(),
            y.len(),
            prior_mean.len()
        )));
    }
    if !(sigma2 > 0.0 && prior_var > 0.0) {
        return Err(Error::ParameterDomain("variances must be positive".into()));
    }
    let mut q = DMatrix::identity(p, p) / prior_var;
    let mut rhs = DVector::from_column_slice(prior_mean) / prior_var;
    if design.nrows() > 0 {
        if precision.dim() != design.nrows() {
            return Err(Error::Shape("precision does not match design rows".into()));
        }
        let px = precision.mul_mat(design);
        q += design.transpose() * &px / sigma2;
        rhs += px.transpose() * DVector::from_column_slice(y) / sigma2;
    }
    GaussianConditional::from_information(q, rhs)
}

/// Inverse-gamma law with density proportional to `x^{-shape-1} e^{-rate/x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    pub shape: f64,
    pub rate: f64,
}

impl InverseGamma {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = Gamma::new(self.shape, 1.0 / self.rate).expect("positive inverse-gamma parameters");
        1.0 / g.sample(rng)
    }

    pub fn mean(&self) -> f64 {
        self.rate / (self.shape - 1.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        m * m / (self.shape - 2.0)
    }
}

/// Conjugate update of an `IG(shape, scale)` prior by `n` Gaussian
/// residuals with quadratic form `q = r' P r`.
pub fn variance_conditional(q: f64, n: usize, prior_shape: f64, prior_scale: f64) -> Result<InverseGamma> {
    if !q.is_finite() || q < 0.0 || (n > 0 && q <= 0.0) {
        return Err(Error::NumericalDegeneracy(format!("residual quadratic form {q} is not positive")));
    }
    Ok(InverseGamma { shape: prior_shape + n as f64 / 2.0, rate: prior_scale + q / 2.0 })
}

/// Inputs to the latent-temperature conditional.
#[derive(Debug, Clone, Copy)]
pub struct LatentInputs<'a> {
    pub proxy_precision: &'a Precision,
    pub process_precision: &'a Precision,
    pub sigma_p2: f64,
    pub sigma_t2: f64,
    pub alpha: [f64; 2],
    /// Process mean `X beta` over all years.
    pub process_mean: &'a [f64],
    pub rp: &'a [f64],
    pub known: &'a [usize],
    pub t_known: &'a [f64],
    pub unknown: &'a [usize],
}

/// Gaussian conditional of the unknown temperatures given the known ones,
/// the reduced proxy and all parameters.
pub fn latent_conditional(inp: &LatentInputs<'_>) -> Result<GaussianConditional> {
    let n = inp.rp.len();
    let [a0, a1] = inp.alpha;
    let wk = 1.0 / inp.sigma_t2;
    let wp = a1 * a1 / inp.sigma_p2;
    if !(inp.sigma_t2 > 0.0 && inp.sigma_p2 > 0.0) {
        return Err(Error::ParameterDomain("variances must be positive".into()));
    }
    // Known temperatures enter through the zero-padded vector t0.
    let mut t0 = vec![0.0; n];
    for (&i, &t) in inp.known.iter().zip(inp.t_known) {
        t0[i] = t;
    }
    let dk: Vec<f64> = inp.process_mean.iter().zip(&t0).map(|(m, t)| m - t).collect();
    let dp: Vec<f64> = inp.rp.iter().zip(&t0).map(|(r, t)| r - a0 - a1 * t).collect();
    let gk = inp.process_precision.mul_vec(&dk);
    let gp = inp.proxy_precision.mul_vec(&dp);
    let rhs = DVector::from_iterator(
        inp.unknown.len(),
        inp.unknown.iter().map(|&i| wk * gk[i] + a1 / inp.sigma_p2 * gp[i]),
    );
    let q = inp.process_precision.block(inp.unknown, inp.unknown) * wk
        + inp.proxy_precision.block(inp.unknown, inp.unknown) * wp;
    GaussianConditional::from_information(q, rhs)
}
