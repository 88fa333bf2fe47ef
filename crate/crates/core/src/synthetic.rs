//! Pseudoproxy data drawn from the model with known parameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{sample_noise, Memory, NoiseKind, NoiseModel};
use crate::reduction::{ColumnRole, TimeSeriesFrame, YearRange};
use crate::sampler::{Forcings, ModelData};

/// Generator settings. Prediction years come first, followed directly by
/// the calibration years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub start_year: i32,
    pub prediction_years: usize,
    pub calibration_years: usize,
    pub alpha: [f64; 2],
    /// Coefficients on the intercept and the standardized forcings.
    pub beta: [f64; 4],
    /// Marginal standard deviations of the two error processes.
    pub sigma_p: f64,
    pub sigma_t: f64,
    pub proxy_error: NoiseKind,
    pub process_error: NoiseKind,
    /// Memory parameters (`H`/`K` or AR coefficients); ignored for white.
    pub h: f64,
    pub k: f64,
    /// Number of noisy copies of the reduced proxy in the panel.
    pub panel_size: usize,
    pub panel_noise: f64,
    /// Expected number of volcanic eruptions per century.
    pub eruptions_per_century: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            start_year: 1000,
            prediction_years: 300,
            calibration_years: 300,
            alpha: [0.2, 0.8],
            beta: [0.0, 0.1, -0.15, 0.3],
            sigma_p: 0.3,
            sigma_t: 0.2,
            proxy_error: NoiseKind::Fgn,
            process_error: NoiseKind::Fgn,
            h: 0.7,
            k: 0.7,
            panel_size: 0,
            panel_noise: 0.5,
            eruptions_per_century: 3.0,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.prediction_years == 0 || self.calibration_years < 3 {
            return Err(Error::Config("synthetic record needs prediction and calibration years".into()));
        }
        if !(self.sigma_p >= 0.0 && self.sigma_t >= 0.0 && self.panel_noise >= 0.0) {
            return Err(Error::Config("noise scales must be nonnegative".into()));
        }
        if !(self.eruptions_per_century >= 0.0) {
            return Err(Error::Config("eruption rate must be nonnegative".into()));
        }
        Memory::from_kind(self.proxy_error, self.h)?;
        Memory::from_kind(self.process_error, self.k)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.prediction_years + self.calibration_years
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn prediction_window(&self) -> YearRange {
        YearRange { start: self.start_year, end: self.start_year + self.prediction_years as i32 - 1 }
    }

    pub fn calibration_window(&self) -> YearRange {
        let start = self.start_year + self.prediction_years as i32;
        YearRange { start, end: start + self.calibration_years as i32 - 1 }
    }
}

/// Generated record plus the values it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub years: Vec<i32>,
    pub rp: Vec<f64>,
    /// Instrumental temperature, present on calibration years only.
    pub temperature: Vec<Option<f64>>,
    pub forcings: Forcings,
    pub panel: Vec<(String, Vec<f64>)>,
    /// True temperature on every year.
    pub truth: Vec<f64>,
    pub calibration: YearRange,
    pub prediction: YearRange,
}

impl SyntheticData {
    /// Frame with the proxy panel (or the reduced proxy as `rp` when the
    /// panel is empty), temperature and forcings.
    pub fn frame(&self) -> Result<TimeSeriesFrame> {
        let mut f = TimeSeriesFrame::new(self.years.clone())?;
        if self.panel.is_empty() {
            f.add_dense("rp", &self.rp, ColumnRole::Proxy)?;
        }
        for (name, v) in &self.panel {
            f.add_dense(name.clone(), v, ColumnRole::Proxy)?;
        }
        f.add_column("temperature", self.temperature.clone(), ColumnRole::Temperature)?;
        f.add_dense("solar", &self.forcings.solar, ColumnRole::Forcing)?;
        f.add_dense("volcanic", &self.forcings.volcanic, ColumnRole::Forcing)?;
        f.add_dense("co2", &self.forcings.co2, ColumnRole::Forcing)?;
        Ok(f)
    }

    pub fn model_data(&self, with_forcings: bool) -> Result<ModelData> {
        let rp: Vec<Option<f64>> = self.rp.iter().copied().map(Some).collect();
        ModelData::new(
            &self.years,
            &rp,
            &self.temperature,
            with_forcings.then_some(&self.forcings),
            self.calibration,
            self.prediction,
        )
    }

    /// True temperatures on the prediction years.
    pub fn prediction_truth(&self) -> Vec<f64> {
        self.truth[..self.prediction.len()].to_vec()
    }
}

/// Solar: a small sinusoid (11- and 200-year cycles). CO2: flat then
/// exponential growth. Volcanic: sparse negative spikes decaying over two
/// years.
pub fn default_forcings<R: Rng + ?Sized>(n: usize, eruptions_per_century: f64, rng: &mut R) -> Forcings {
    let tau = std::f64::consts::TAU;
    let solar = (0..n)
        .map(|t| {
            let t = t as f64;
            1365.0 + 0.5 * (tau * t / 11.0).sin() + 0.8 * (tau * t / 200.0).sin()
        })
        .collect();
    let co2 = (0..n)
        .map(|t| {
            let u = t as f64 / (n.max(2) - 1) as f64;
            280.0 * (1.0 + 0.4 * (6.0 * (u - 1.0)).exp())
        })
        .collect();
    let p = (eruptions_per_century / 100.0).min(1.0);
    let mut volcanic = vec![0.0; n];
    let mut spikes = 0;
    for t in 0..n {
        if rng.random::<f64>() < p {
            spike(&mut volcanic, t, -rng.random_range(0.5..4.0));
            spikes += 1;
        }
    }
    // Guarantee two events so the transformed series is never constant.
    for t in [n / 3, 2 * n / 3].into_iter().take(2usize.saturating_sub(spikes)) {
        spike(&mut volcanic, t, -2.0);
    }
    Forcings { solar, volcanic, co2 }
}

fn spike(v: &mut [f64], t: usize, size: f64) {
    for (lag, decay) in [1.0, 0.5, 0.25].into_iter().enumerate() {
        if let Some(cell) = v.get_mut(t + lag) {
            *cell += size * decay;
        }
    }
}

fn noise<R: Rng + ?Sized>(kind: NoiseKind, param: f64, scale: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let model = NoiseModel::new(Memory::from_kind(kind, param)?, scale)?;
    sample_noise(&model, n, rng)
}

/// Draws forcings, the process-level temperatures, the reduced proxy and an
/// optional proxy panel. Deterministic given `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let years: Vec<i32> = (0..n as i32).map(|i| spec.start_year + i).collect();
    let forcings = default_forcings(n, spec.eruptions_per_century, &mut rng);

    let calibration = spec.calibration_window();
    let prediction = spec.prediction_window();
    let temperature_stub = vec![Some(0.0); n];
    let rp_stub = vec![Some(0.0); n];
    let design = ModelData::new(&years, &rp_stub, &temperature_stub, Some(&forcings), calibration, prediction)?
        .design(true)?;

    let eps = noise(spec.process_error, spec.k, spec.sigma_t, n, &mut rng)?;
    let eta = noise(spec.proxy_error, spec.h, spec.sigma_p, n, &mut rng)?;
    let mean: DVector<f64> = &design * DVector::from_column_slice(&spec.beta);
    let truth: Vec<f64> = mean.iter().zip(&eps).map(|(m, e)| m + e).collect();
    let rp: Vec<f64> = truth
        .iter()
        .zip(&eta)
        .map(|(t, e)| spec.alpha[0] + spec.alpha[1] * t + e)
        .collect();
    let temperature = years
        .iter()
        .zip(&truth)
        .map(|(y, t)| calibration.contains(*y).then_some(*t))
        .collect();
    let mut panel = Vec::with_capacity(spec.panel_size);
    for i in 0..spec.panel_size {
        let e = noise(NoiseKind::White, 0.5, spec.panel_noise, n, &mut rng)?;
        panel.push((format!("proxy_{:02}", i + 1), rp.iter().zip(&e).map(|(r, e)| r + e).collect()));
    }
    Ok(SyntheticData { years, rp, temperature, forcings, panel, truth, calibration, prediction })
}

/// Standardized forcing design `[1, S, log(1 - V), log C]` of a record.
pub fn forcing_design(data: &SyntheticData) -> Result<DMatrix<f64>> {
    data.model_data(true)?.design(true)
}
