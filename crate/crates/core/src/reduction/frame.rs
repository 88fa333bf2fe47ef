use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Proxy,
    Temperature,
    Forcing,
}

/// Per-series transform applied before standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// `log(x)`, for strictly positive series such as varve thickness.
    Log,
    /// `log(1 - x)`, for nonpositive series such as volcanic forcing.
    LogOneMinus,
}

impl Transform {
    pub fn apply(self, x: f64) -> Option<f64> {
        match self {
            Transform::Identity => Some(x),
            Transform::Log => (x > 0.0).then(|| x.ln()),
            Transform::LogOneMinus => (1.0 - x > 0.0).then(|| (1.0 - x).ln()),
        }
    }
}

/// Inclusive range of years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!("year range {start}..{end} is empty")));
        }
        Ok(YearRange { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        year >= self.start && year <= self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

impl std::fmt::Display for YearRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl std::str::FromStr for YearRange {
    type Err = Error;

    /// Accepts `start..end`, `start:end` or `start-end`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let split = s
            .find("..")
            .map(|i| (i, 2))
            .or_else(|| s.find(':').map(|i| (i, 1)))
            .or_else(|| s[1..].find('-').map(|i| (i + 1, 1)));
        let (i, w) = split.ok_or_else(|| Error::Config(format!("cannot parse year range `{s}`")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| Error::Config(format!("cannot parse year range `{s}`")))
        };
        YearRange::new(parse(&s[..i])?, parse(&s[i + w..])?)
    }
}

/// One named annual series with missing cells as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub values: Vec<Option<f64>>,
    pub role: ColumnRole,
    pub transform: Transform,
}

/// Aligned annual series on a shared, strictly increasing year axis.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSeriesFrame {
    years: Vec<i32>,
    columns: IndexMap<String, Column>,
}

impl TimeSeriesFrame {
    pub fn new(years: Vec<i32>) -> Result<Self> {
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data("years must be strictly increasing".into()));
        }
        Ok(TimeSeriesFrame { years, columns: IndexMap::new() })
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn len(&self) -> usize {
        self.years.len()
    }

    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    pub fn add_column(&mut self, name: impl Into<String>, values: Vec<Option<f64>>, role: ColumnRole) -> Result<()> {
        let name = name.into();
        if values.len() != self.years.len() {
            return Err(Error::Shape(format!(
                "column `{name}` has {} values for {} years",
                values.len(),
                self.years.len()
            )));
        }
        if values.iter().all(Option::is_none) {
            return Err(Error::Data(format!("column `{name}` has no observations")));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("column `{name}` contains non-finite values")));
        }
        self.columns.insert(name, Column { values, role, transform: Transform::Identity });
        Ok(())
    }

    /// Adds a fully observed column.
    pub fn add_dense(&mut self, name: impl Into<String>, values: &[f64], role: ColumnRole) -> Result<()> {
        self.add_column(name, values.iter().copied().map(Some).collect(), role)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::Config(format!("no column named `{name}`")))
    }

    pub fn values(&self, name: &str) -> Result<&[Option<f64>]> {
        Ok(&self.column(name)?.values)
    }

    pub fn set_values(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        let n = self.years.len();
        let col = self
            .columns
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("no column named `{name}`")))?;
        if values.len() != n {
            return Err(Error::Shape(format!("column `{name}` needs {n} values")));
        }
        col.values = values;
        Ok(())
    }

    pub fn set_transform(&mut self, name: &str, transform: Transform) -> Result<()> {
        self.columns
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("no column named `{name}`")))?
            .transform = transform;
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Option<Column> {
        self.columns.shift_remove(name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn names_with_role(&self, role: ColumnRole) -> Vec<String> {
        self.columns
            .iter()
            .filter(|(_, c)| c.role == role)
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(n, c)| (n.as_str(), c))
    }

    /// Indices of the years inside `window`.
    pub fn window_indices(&self, window: YearRange) -> Vec<usize> {
        self.years
            .iter()
            .enumerate()
            .filter(|(_, y)| window.contains(**y))
            .map(|(i, _)| i)
            .collect()
    }

    /// Replaces each column's values by its transform, resetting the flag
    /// to identity. A value outside the transform's domain is a data error
    /// naming the year.
    pub fn apply_transforms(&mut self) -> Result<()> {
        for (name, col) in self.columns.iter_mut() {
            if col.transform == Transform::Identity {
                continue;
            }
            for (i, cell) in col.values.iter_mut().enumerate() {
                if let Some(v) = *cell {
                    *cell = Some(col.transform.apply(v).ok_or_else(|| {
                        Error::Data(format!(
                            "column `{name}` value {v} in year {} is outside the domain of {:?}",
                            self.years[i], col.transform
                        ))
                    })?);
                }
            }
            col.transform = Transform::Identity;
        }
        Ok(())
    }

    /// Rows restricted to `keep` years (sorted), preserving columns.
    pub fn restrict(&self, window: YearRange) -> Result<Self> {
        let idx = self.window_indices(window);
        let mut out = TimeSeriesFrame::new(idx.iter().map(|&i| self.years[i]).collect())?;
        for (name, col) in &self.columns {
            let values: Vec<Option<f64>> = idx.iter().map(|&i| col.values[i]).collect();
            if values.iter().any(Option::is_some) {
                out.columns.insert(
                    name.clone(),
                    Column { values, role: col.role, transform: col.transform },
                );
            }
        }
        Ok(out)
    }
}
