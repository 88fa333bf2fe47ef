use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::reduction::{Transform, YearRange};
use crate::stats;

/// Raw forcing series aligned with a year axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcings {
    pub solar: Vec<f64>,
    pub volcanic: Vec<f64>,
    pub co2: Vec<f64>,
}

/// `(log(1 - V), log C)` elementwise; an out-of-domain value is a parameter
/// error naming its year.
pub fn transform_forcings(years: &[i32], volcanic: &[f64], co2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if volcanic.len() != years.len() || co2.len() != years.len() {
        return Err(Error::Shape("forcing series must match the year axis".into()));
    }
    let map = |xs: &[f64], t: Transform, what: &str| -> Result<Vec<f64>> {
        xs.iter()
            .zip(years)
            .map(|(&x, y)| {
                t.apply(x).ok_or_else(|| {
                    Error::ParameterDomain(format!("{what} value {x} in year {y} is outside the log domain"))
                })
            })
            .collect()
    };
    Ok((
        map(volcanic, Transform::LogOneMinus, "volcanic")?,
        map(co2, Transform::Log, "CO2")?,
    ))
}

/// Observations on a contiguous span of years: the reduced proxy everywhere,
/// temperature on the calibration years, and optionally the forcing design.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub years: Vec<i32>,
    pub rp: Vec<f64>,
    /// Positions of calibration years (temperature observed).
    pub known: Vec<usize>,
    pub t_known: Vec<f64>,
    /// Positions of prediction years (temperature latent).
    pub unknown: Vec<usize>,
    /// Standardized `[S, log(1 - V), log C]`, one row per year.
    pub forcings: Option<DMatrix<f64>>,
    /// Sample standard deviation of `log C` over the span.
    pub log_co2_sd: Option<f64>,
}

impl ModelData {
    /// Assembles the model span as the union of two adjacent, disjoint
    /// windows. Inputs are aligned with `years`; the proxy must be present on
    /// the whole span and temperature on every calibration year.
    pub fn new(
        years: &[i32],
        rp: &[Option<f64>],
        temperature: &[Option<f64>],
        forcings: Option<&Forcings>,
        calibration: YearRange,
        prediction: YearRange,
    ) -> Result<Self> {
        if rp.len() != years.len() || temperature.len() != years.len() {
            return Err(Error::Shape("proxy and temperature must match the year axis".into()));
        }
        let overlap = calibration.start <= prediction.end && prediction.start <= calibration.end;
        if overlap {
            return Err(Error::Config(format!(
                "calibration {calibration} and prediction {prediction} windows overlap"
            )));
        }
        let span = YearRange::new(
            calibration.start.min(prediction.start),
            calibration.end.max(prediction.end),
        )?;
        if span.len() != calibration.len() + prediction.len() {
            return Err(Error::Config(format!(
                "calibration {calibration} and prediction {prediction} windows are not adjacent"
            )));
        }
        let mut idx = Vec::with_capacity(span.len());
        for y in span.years() {
            let i = years
                .binary_search(&y)
                .map_err(|_| Error::Data(format!("year {y} is missing from the input series")))?;
            idx.push(i);
        }
        let mut out_rp = Vec::with_capacity(idx.len());
        let (mut known, mut t_known, mut unknown) = (Vec::new(), Vec::new(), Vec::new());
        for (pos, &i) in idx.iter().enumerate() {
            let y = years[i];
            out_rp.push(rp[i].ok_or_else(|| Error::Data(format!("reduced proxy is missing in year {y}")))?);
            if calibration.contains(y) {
                let t = temperature[i].ok_or_else(|| {
                    Error::Data(format!("instrumental temperature is missing in calibration year {y}"))
                })?;
                known.push(pos);
                t_known.push(t);
            } else {
                unknown.push(pos);
            }
        }
        let span_years: Vec<i32> = span.years().collect();
        let (design, log_co2_sd) = match forcings {
            None => (None, None),
            Some(f) => {
                if f.solar.len() != years.len() || f.volcanic.len() != years.len() || f.co2.len() != years.len() {
                    return Err(Error::Shape("forcings must match the year axis".into()));
                }
                let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
                let (v, c) = transform_forcings(&span_years, &pick(&f.volcanic), &pick(&f.co2))?;
                let s = pick(&f.solar);
                let cols = [standardized(&s, "solar")?, standardized(&v, "volcanic")?, standardized(&c, "CO2")?];
                let m = DMatrix::from_fn(idx.len(), 3, |r, c| cols[c][r]);
                (Some(m), Some(stats::sample_sd(&c)))
            }
        };
        Ok(ModelData {
            years: span_years,
            rp: out_rp,
            known,
            t_known,
            unknown,
            forcings: design,
            log_co2_sd,
        })
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn prediction_years(&self) -> Vec<i32> {
        self.unknown.iter().map(|&i| self.years[i]).collect()
    }

    /// Process-level design: an intercept, then the forcings when requested.
    pub fn design(&self, with_forcings: bool) -> Result<DMatrix<f64>> {
        let n = self.len();
        if !with_forcings {
            return Ok(DMatrix::from_element(n, 1, 1.0));
        }
        let f = self
            .forcings
            .as_ref()
            .ok_or_else(|| Error::Config("scenario needs forcings but none were supplied".into()))?;
        Ok(DMatrix::from_fn(n, 4, |r, c| if c == 0 { 1.0 } else { f[(r, c - 1)] }))
    }
}

fn standardized(x: &[f64], what: &str) -> Result<Vec<f64>> {
    let m = stats::mean(x);
    let sd = stats::sample_sd(x);
    if !(sd > 0.0) {
        return Err(Error::DegenerateInput(format!("{what} forcing is constant")));
    }
    Ok(x.iter().map(|v| (v - m) / sd).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forcing_transforms() {
        let (v, c) = transform_forcings(&[1, 2], &[0.0, -(std::f64::consts::E - 1.0)], &[1.0, 1.0]).unwrap();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert_eq!(c, vec![0.0, 0.0]);
        let err = transform_forcings(&[1, 2], &[0.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("year 2"));
    }

    #[test]
    fn missing_calibration_year_is_named() {
        let years: Vec<i32> = (0..6).collect();
        let rp = vec![Some(0.0); 6];
        let mut t = vec![Some(0.0); 6];
        t[4] = None;
        let err = ModelData::new(
            &years,
            &rp,
            &t,
            None,
            YearRange::new(3, 5).unwrap(),
            YearRange::new(0, 2).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("year 4")), "{err}");
    }

    #[test]
    fn windows_must_touch() {
        let years: Vec<i32> = (0..6).collect();
        let v = vec![Some(0.0); 6];
        let r = ModelData::new(&years, &v, &v, None, YearRange::new(4, 5).unwrap(), YearRange::new(0, 2).unwrap());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
