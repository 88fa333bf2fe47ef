//! Gibbs/Metropolis sampler for the two-level reconstruction model
//!
//! ```text
//! RP_t = a0 + a1 T_t + sigma_P eta_t
//! T_t  = b0 + b1 S_t + b2 V~_t + b3 C~_t + sigma_T eps_t
//! ```
//!
//! where `eta` and `eps` are independent unit-variance white, AR(1) or fGn
//! processes with memory parameters `H` and `K`. One sweep updates, in order,
//! alpha, beta, sigma_P^2, sigma_T^2, H, K and the latent temperatures.

pub mod conditionals;
mod data;
pub mod mh;

pub use conditionals::{
    latent_conditional, regression_conditional, variance_conditional, GaussianConditional, InverseGamma,
    LatentInputs, Precision,
};
pub use data::{transform_forcings, Forcings, ModelData};
pub use mh::{mh_step, MhOutcome, TruncatedWalk};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{acvf, loglik_durbin_levinson, Memory, NoiseKind, NoiseModel};
use crate::stats;

/// The eight model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::A,
        Scenario::B,
        Scenario::C,
        Scenario::D,
        Scenario::E,
        Scenario::F,
        Scenario::G,
        Scenario::H,
    ];

    /// `(proxy error, process error, forcings included)`.
    pub fn structure(self) -> (NoiseKind, NoiseKind, bool) {
        use NoiseKind::*;
        match self {
            Scenario::A => (Fgn, Fgn, true),
            Scenario::B => (Fgn, Ar1, true),
            Scenario::C => (Ar1, Fgn, true),
            Scenario::D => (Ar1, Ar1, true),
            Scenario::E => (White, White, true),
            Scenario::F => (Fgn, Fgn, false),
            Scenario::G => (Ar1, Ar1, false),
            Scenario::H => (White, White, false),
        }
    }

    pub fn as_str(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F", "G", "H"][self as usize]
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}` (expected A-H)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub chains: usize,
    pub seed: u64,
    pub mh_step_h: f64,
    pub mh_step_k: f64,
    /// Rescale MH steps during burn-in toward a 0.2-0.5 acceptance rate.
    pub adapt_steps: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            iterations: 5000,
            burn_in: 1000,
            chains: 1,
            seed: 1,
            mh_step_h: 0.02,
            mh_step_k: 0.02,
            adapt_steps: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub label: Scenario,
    pub proxy_error: NoiseKind,
    pub process_error: NoiseKind,
    pub forcings_included: bool,
    pub chain: ChainSettings,
}

impl ScenarioConfig {
    pub fn new(label: Scenario, chain: ChainSettings) -> Result<Self> {
        let (proxy_error, process_error, forcings_included) = label.structure();
        let cfg = ScenarioConfig { label, proxy_error, process_error, forcings_included, chain };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.structure() != (self.proxy_error, self.process_error, self.forcings_included) {
            return Err(Error::Config(format!(
                "scenario {} does not match ({}, {}, forcings {})",
                self.label, self.proxy_error, self.process_error, self.forcings_included
            )));
        }
        let c = &self.chain;
        if c.burn_in >= c.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below iterations {}",
                c.burn_in, c.iterations
            )));
        }
        if c.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if !(c.mh_step_h > 0.0 && c.mh_step_k > 0.0) {
            return Err(Error::Config("MH step sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        self.chain.iterations - self.chain.burn_in
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = vec!["alpha0", "alpha1", "beta0"];
        if self.forcings_included {
            names.extend(["beta1", "beta2", "beta3"]);
        }
        names.extend(["sigma_p2", "sigma_t2"]);
        names.push(if self.proxy_error == NoiseKind::Ar1 { "phi_p" } else { "H" });
        names.push(if self.process_error == NoiseKind::Ar1 { "phi_t" } else { "K" });
        names.into_iter().map(String::from).collect()
    }
}

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Priors {
    pub alpha_mean: [f64; 2],
    pub beta_mean: [f64; 4],
    pub coef_variance: f64,
    pub ig_shape: f64,
    pub ig_scale: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            alpha_mean: [0.0, 1.0],
            beta_mean: [0.0, 1.0, 1.0, 1.0],
            coef_variance: 1.0,
            ig_shape: 2.0,
            ig_scale: 0.1,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        if !(self.coef_variance > 0.0 && self.ig_shape > 0.0 && self.ig_scale > 0.0) {
            return Err(Error::Config("prior variances and inverse-gamma parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Current values of every unknown. `h` and `k` hold the proxy- and
/// process-level memory parameters (Hurst exponent, AR coefficient, or 0.5
/// for white errors).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub alpha: [f64; 2],
    pub beta: Vec<f64>,
    pub sigma_p2: f64,
    pub sigma_t2: f64,
    pub h: f64,
    pub k: f64,
    pub t_u: Vec<f64>,
}

/// Memory parameter value used for white-noise levels.
pub const WHITE_MEMORY: f64 = 0.5;

fn memory_of(kind: NoiseKind, param: f64) -> Result<Memory<f64>> {
    Memory::from_kind(kind, param)
}

impl ModelState {
    pub fn validate(&self, proxy: NoiseKind, process: NoiseKind) -> Result<()> {
        if !(self.sigma_p2 > 0.0 && self.sigma_t2 > 0.0) {
            return Err(Error::ParameterDomain("variances must be positive".into()));
        }
        for (kind, v) in [(proxy, self.h), (process, self.k)] {
            match kind {
                NoiseKind::White if v != WHITE_MEMORY => {
                    return Err(Error::ParameterDomain("white levels fix memory at 0.5".into()))
                }
                _ => memory_of(kind, v).map(|_| ())?,
            }
        }
        Ok(())
    }

    /// Flattened parameter row in [`ScenarioConfig::parameter_names`] order.
    pub fn parameter_row(&self) -> Vec<f64> {
        let mut row = vec![self.alpha[0], self.alpha[1]];
        row.extend(&self.beta);
        row.extend([self.sigma_p2, self.sigma_t2, self.h, self.k]);
        row
    }

    /// Full temperature vector on the model span.
    pub fn temperatures(&self, data: &ModelData) -> Vec<f64> {
        let mut t = vec![0.0; data.len()];
        for (&i, &v) in data.known.iter().zip(&data.t_known) {
            t[i] = v;
        }
        for (&i, &v) in data.unknown.iter().zip(&self.t_u) {
            t[i] = v;
        }
        t
    }
}

/// Draws from one chain after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// Kept iterations by parameter.
    pub parameters: DMatrix<f64>,
    /// Kept iterations by prediction year.
    pub latent: DMatrix<f64>,
    /// Acceptance rates over kept iterations, keyed by parameter name.
    pub acceptance: IndexMap<String, f64>,
    /// Number of memory-parameter likelihood evaluations.
    pub memory_evaluations: usize,
    /// MH step sizes in force after burn-in.
    pub steps: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub scenario: ScenarioConfig,
    pub parameter_names: Vec<String>,
    pub prediction_years: Vec<i32>,
    pub chains: Vec<ChainDraws>,
}

impl PosteriorDraws {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.parameter_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no parameter named `{name}`")))
    }

    /// Draws of one parameter, one vector per chain.
    pub fn parameter_by_chain(&self, name: &str) -> Result<Vec<Vec<f64>>> {
        let j = self.column_index(name)?;
        Ok(self.chains.iter().map(|c| c.parameters.column(j).iter().copied().collect()).collect())
    }

    /// Pooled draws of one parameter.
    pub fn parameter(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.parameter_by_chain(name)?.concat())
    }

    fn stack(mats: Vec<&DMatrix<f64>>) -> DMatrix<f64> {
        let cols = mats[0].ncols();
        let rows: usize = mats.iter().map(|m| m.nrows()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut r = 0;
        for m in mats {
            out.rows_mut(r, m.nrows()).copy_from(m);
            r += m.nrows();
        }
        out
    }

    pub fn pooled_parameters(&self) -> DMatrix<f64> {
        Self::stack(self.chains.iter().map(|c| &c.parameters).collect())
    }

    pub fn pooled_latent(&self) -> DMatrix<f64> {
        Self::stack(self.chains.iter().map(|c| &c.latent).collect())
    }

    /// Acceptance rates averaged over chains.
    pub fn acceptance_rates(&self) -> IndexMap<String, f64> {
        let mut out: IndexMap<String, f64> = IndexMap::new();
        for c in &self.chains {
            for (k, v) in &c.acceptance {
                *out.entry(k.clone()).or_default() += v / self.chains.len() as f64;
            }
        }
        out
    }
}

/// Cached factorization of one error level.
#[derive(Debug, Clone)]
struct Level {
    kind: NoiseKind,
    param: f64,
    precision: Precision,
    walk: Option<TruncatedWalk>,
}

impl Level {
    fn new(kind: NoiseKind, param: f64, n: usize, step: f64) -> Result<Self> {
        let walk = kind.param_bounds().map(|(lo, hi)| TruncatedWalk::new(lo, hi, step));
        Ok(Level { kind, param, precision: Precision::from_memory(memory_of(kind, param)?, n)?, walk })
    }
}

/// Exact Gaussian log-likelihood of `r` under variance `sigma2` and the
/// memory structure `(kind, param)`.
pub fn error_loglik(r: &[f64], kind: NoiseKind, param: f64, sigma2: f64) -> Result<f64> {
    let model = NoiseModel::new(memory_of(kind, param)?, sigma2.sqrt())?;
    loglik_durbin_levinson(r, &acvf(&model, r.len() - 1)?)
}

struct Sampler<'a> {
    data: &'a ModelData,
    priors: &'a Priors,
    design: DMatrix<f64>,
    beta_prior: Vec<f64>,
    state: ModelState,
    proxy: Level,
    process: Level,
    evaluations: usize,
}

impl<'a> Sampler<'a> {
    fn proxy_residual(&self, t: &[f64]) -> Vec<f64> {
        let [a0, a1] = self.state.alpha;
        self.data.rp.iter().zip(t).map(|(r, t)| r - a0 - a1 * t).collect()
    }

    fn process_mean(&self) -> DVector<f64> {
        &self.design * DVector::from_column_slice(&self.state.beta)
    }

    fn process_residual(&self, t: &[f64]) -> Vec<f64> {
        let m = self.process_mean();
        t.iter().zip(m.iter()).map(|(t, m)| t - m).collect()
    }

    fn step_alpha<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let t = self.state.temperatures(self.data);
        let a = DMatrix::from_fn(t.len(), 2, |r, c| if c == 0 { 1.0 } else { t[r] });
        let g = regression_conditional(
            &a,
            &self.data.rp,
            &self.proxy.precision,
            self.state.sigma_p2,
            &self.priors.alpha_mean,
            self.priors.coef_variance,
        )?;
        let d = g.sample(rng);
        self.state.alpha = [d[0], d[1]];
        Ok(())
    }

    fn step_beta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let t = self.state.temperatures(self.data);
        let g = regression_conditional(
            &self.design,
            &t,
            &self.process.precision,
            self.state.sigma_t2,
            &self.beta_prior,
            self.priors.coef_variance,
        )?;
        self.state.beta = g.sample(rng).iter().copied().collect();
        Ok(())
    }

    fn step_variances<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n = self.data.len();
        let t = self.state.temperatures(self.data);
        let q = self.proxy.precision.quad(&self.proxy_residual(&t));
        self.state.sigma_p2 = variance_conditional(q, n, self.priors.ig_shape, self.priors.ig_scale)?.sample(rng);
        let q = self.process.precision.quad(&self.process_residual(&t));
        self.state.sigma_t2 = variance_conditional(q, n, self.priors.ig_shape, self.priors.ig_scale)?.sample(rng);
        Ok(())
    }

    /// One MH update of the proxy (`proxy = true`) or process memory.
    fn step_memory<R: Rng + ?Sized>(&mut self, proxy: bool, rng: &mut R) -> Result<Option<bool>> {
        let t = self.state.temperatures(self.data);
        let (level, r, sigma2) = if proxy {
            (&self.proxy, self.proxy_residual(&t), self.state.sigma_p2)
        } else {
            (&self.process, self.process_residual(&t), self.state.sigma_t2)
        };
        let Some(walk) = level.walk else {
            return Ok(None);
        };
        let kind = level.kind;
        let current = level.param;
        let mut evals = 0;
        let mut target = |p: f64| {
            evals += 1;
            error_loglik(&r, kind, p, sigma2)
        };
        let log_x = target(current)?;
        let out = mh_step(&walk, current, log_x, &mut target, rng)?;
        self.evaluations += evals;
        if out.accepted {
            let n = self.data.len();
            let level = if proxy { &mut self.proxy } else { &mut self.process };
            level.param = out.value;
            level.precision = Precision::from_memory(memory_of(kind, out.value)?, n)?;
            if proxy {
                self.state.h = out.value;
            } else {
                self.state.k = out.value;
            }
        }
        Ok(Some(out.accepted))
    }

    fn step_latent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.data.unknown.is_empty() {
            return Ok(());
        }
        let mean = self.process_mean();
        let g = latent_conditional(&LatentInputs {
            proxy_precision: &self.proxy.precision,
            process_precision: &self.process.precision,
            sigma_p2: self.state.sigma_p2,
            sigma_t2: self.state.sigma_t2,
            alpha: self.state.alpha,
            process_mean: mean.as_slice(),
            rp: &self.data.rp,
            known: &self.data.known,
            t_known: &self.data.t_known,
            unknown: &self.data.unknown,
        })?;
        self.state.t_u = g.sample(rng).iter().copied().collect();
        Ok(())
    }
}

/// Least-squares starting point, with memory parameters drawn from the
/// chain's stream so that chains start apart.
fn initial_state<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    data: &ModelData,
    design: &DMatrix<f64>,
    rng: &mut R,
) -> Result<ModelState> {
    let rp_known: Vec<f64> = data.known.iter().map(|&i| data.rp[i]).collect();
    let (mut a1, mut a0) = stats::simple_regression(&data.t_known, &rp_known)?;
    if a1.abs() < 1e-6 {
        a1 = 1.0;
        a0 = stats::mean(&rp_known) - stats::mean(&data.t_known);
    }
    let t_u: Vec<f64> = data.unknown.iter().map(|&i| (data.rp[i] - a0) / a1).collect();
    let mut state = ModelState {
        alpha: [a0, a1],
        beta: vec![0.0; design.ncols()],
        sigma_p2: 1.0,
        sigma_t2: 1.0,
        h: WHITE_MEMORY,
        k: WHITE_MEMORY,
        t_u,
    };
    let t = state.temperatures(data);
    let beta = design
        .clone()
        .svd(true, true)
        .solve(&DVector::from_column_slice(&t), 1e-12)
        .map_err(|e| Error::NumericalDegeneracy(format!("initial regression failed: {e}")))?;
    state.beta = beta.iter().copied().collect();
    let fitted = design * &beta;
    let rt: Vec<f64> = t.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rp: Vec<f64> = data.rp.iter().zip(&t).map(|(r, t)| r - a0 - a1 * t).collect();
    state.sigma_t2 = stats::sample_variance(&rt).max(1e-4);
    state.sigma_p2 = stats::sample_variance(&rp).max(1e-4);
    let draw = |kind: NoiseKind, rng: &mut R| match kind {
        NoiseKind::White => WHITE_MEMORY,
        NoiseKind::Fgn => rng.random_range(0.3..0.8),
        NoiseKind::Ar1 => rng.random_range(-0.3..0.6),
    };
    state.h = draw(config.proxy_error, rng);
    state.k = draw(config.process_error, rng);
    Ok(state)
}

/// Random stream for chain `index` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Runs one chain from its least-squares starting point.
pub fn run_single_chain(
    config: &ScenarioConfig,
    data: &ModelData,
    priors: &Priors,
    index: usize,
) -> Result<ChainDraws> {
    let mut rng = chain_rng(config.chain.seed, index);
    let design = data.design(config.forcings_included)?;
    let state = initial_state(config, data, &design, &mut rng)?;
    run_from_state(config, data, priors, state, &mut rng)
}

/// Runs one chain from a given state.
pub fn run_from_state<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    data: &ModelData,
    priors: &Priors,
    state: ModelState,
    rng: &mut R,
) -> Result<ChainDraws> {
    config.validate()?;
    priors.validate()?;
    state.validate(config.proxy_error, config.process_error)?;
    let n = data.len();
    if n < 2 || data.known.is_empty() {
        return Err(Error::InsufficientSample("model needs calibration years".into()));
    }
    let design = data.design(config.forcings_included)?;
    if state.beta.len() != design.ncols() || state.t_u.len() != data.unknown.len() {
        return Err(Error::Shape("initial state does not match the model dimensions".into()));
    }
    let beta_prior = priors.beta_mean[..design.ncols()].to_vec();
    let cs = config.chain;
    let mut s = Sampler {
        data,
        priors,
        proxy: Level::new(config.proxy_error, state.h, n, cs.mh_step_h)?,
        process: Level::new(config.process_error, state.k, n, cs.mh_step_k)?,
        design,
        beta_prior,
        state,
        evaluations: 0,
    };

    let names = config.parameter_names();
    let kept = config.kept();
    let mut params = DMatrix::zeros(kept, names.len());
    let mut latent = DMatrix::zeros(kept, data.unknown.len());
    let (mut acc_h, mut acc_k) = (0usize, 0usize);
    let (mut win_h, mut win_k) = (0usize, 0usize);
    const WINDOW: usize = 50;

    for it in 0..cs.iterations {
        s.step_alpha(rng)?;
        s.step_beta(rng)?;
        s.step_variances(rng)?;
        let ah = s.step_memory(true, rng)?;
        let ak = s.step_memory(false, rng)?;
        s.step_latent(rng)?;

        let burn = it < cs.burn_in;
        if burn {
            win_h += usize::from(ah == Some(true));
            win_k += usize::from(ak == Some(true));
            if cs.adapt_steps && (it + 1) % WINDOW == 0 {
                for (level, win) in [(&mut s.proxy, &mut win_h), (&mut s.process, &mut win_k)] {
                    if let Some(w) = level.walk.as_mut() {
                        let rate = *win as f64 / WINDOW as f64;
                        if rate < 0.2 {
                            w.step *= 0.7;
                        } else if rate > 0.5 {
                            w.step = (w.step * 1.4).min(w.hi - w.lo);
                        }
                    }
                    *win = 0;
                }
            }
        } else {
            let row = it - cs.burn_in;
            acc_h += usize::from(ah == Some(true));
            acc_k += usize::from(ak == Some(true));
            params.row_mut(row).copy_from_slice(&s.state.parameter_row());
            latent.row_mut(row).copy_from_slice(&s.state.t_u);
        }
    }

    let mut acceptance = IndexMap::new();
    for (level, acc, name) in [(&s.proxy, acc_h, &names[names.len() - 2]), (&s.process, acc_k, &names[names.len() - 1])] {
        if level.walk.is_some() {
            let rate = acc as f64 / kept as f64;
            if !(0.1..=0.7).contains(&rate) {
                log::warn!("acceptance rate {rate:.3} for {name} is outside [0.1, 0.7]");
            } else {
                log::info!("acceptance rate {rate:.3} for {name}");
            }
            acceptance.insert(name.clone(), rate);
        }
    }
    let steps = (
        s.proxy.walk.map_or(cs.mh_step_h, |w| w.step),
        s.process.walk.map_or(cs.mh_step_k, |w| w.step),
    );
    Ok(ChainDraws { parameters: params, latent, acceptance, memory_evaluations: s.evaluations, steps })
}

/// Runs `config.chain.chains` independent chains concurrently and collects
/// their draws in chain order.
pub fn run_chain(config: &ScenarioConfig, data: &ModelData, priors: &Priors) -> Result<PosteriorDraws> {
    config.validate()?;
    priors.validate()?;
    data.design(config.forcings_included)?;
    let chains = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.chain.chains)
            .map(|i| scope.spawn(move || run_single_chain(config, data, priors, i)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PosteriorDraws {
        scenario: *config,
        parameter_names: config.parameter_names(),
        prediction_years: data.prediction_years(),
        chains,
    })
}
