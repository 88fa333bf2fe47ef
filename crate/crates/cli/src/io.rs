//! CSV tables keyed by year, and atomic file output.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use indexmap::IndexMap;
use paleomem::Error;

/// A CSV whose first column is `year`; empty cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub years: Vec<i32>,
    pub columns: IndexMap<String, Vec<Option<f64>>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
            .clone();
        if headers.get(0) != Some("year") {
            return Err(Error::Data(format!("{}: first column must be `year`", path.display())).into());
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut years = Vec::new();
        let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            let bad = |what: &str| Error::Data(format!("{}: row {}: bad {what}", path.display(), line + 2));
            years.push(rec.get(0).unwrap_or("").parse::<i32>().map_err(|_| bad("year"))?);
            for (j, col) in cols.iter_mut().enumerate() {
                let cell = rec.get(j + 1).unwrap_or("");
                col.push(if cell.is_empty() || cell.eq_ignore_ascii_case("na") {
                    None
                } else {
                    Some(cell.parse::<f64>().map_err(|_| bad(&names[j]))?)
                });
            }
        }
        if years.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data(format!("{}: years must be strictly increasing", path.display())).into());
        }
        Ok(Table { years, columns: names.into_iter().zip(cols).collect() })
    }

    pub fn column(&self, name: &str, path: &Path) -> Result<&[Option<f64>]> {
        Ok(self
            .columns
            .get(name)
            .ok_or_else(|| Error::Config(format!("{} has no column `{name}`", path.display())))?)
    }

    /// The only data column, or the named one.
    pub fn pick(&self, name: Option<&str>, path: &Path) -> Result<(String, Vec<Option<f64>>)> {
        match name {
            Some(n) => Ok((n.to_string(), self.column(n, path)?.to_vec())),
            None if self.columns.len() == 1 => {
                let (n, v) = self.columns.first().expect("one column");
                Ok((n.clone(), v.clone()))
            }
            None => Err(Error::Config(format!(
                "{} has several columns; choose one with --column",
                path.display()
            ))
            .into()),
        }
    }

    /// Values aligned to `years`, missing where this table lacks the year.
    pub fn aligned(&self, name: &str, years: &[i32], path: &Path) -> Result<Vec<Option<f64>>> {
        let col = self.column(name, path)?;
        Ok(years
            .iter()
            .map(|y| self.years.binary_search(y).ok().and_then(|i| col[i]))
            .collect())
    }
}

/// Shortest round-trip decimal form.
pub fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// CSV bytes from a header and string rows.
pub fn csv_bytes<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(AsRef::as_ref))?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().context("flushing CSV buffer")?)
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Appends one line to a log file.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    writeln!(f, "{line}")?;
    Ok(())
}
