//! TOML run configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::Result;
use indexmap::IndexMap;
use paleomem::reduction::YearRange;
use paleomem::sampler::{ChainSettings, Priors};
use paleomem::synthetic::SyntheticSpec;
use paleomem::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub data: DataSection,
    pub windows: WindowSection,
    pub reduction: ReductionSection,
    pub chain: ChainSettings,
    pub priors: Priors,
    pub synthetic: SyntheticSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Proxy panel, reduced to one series before sampling.
    pub proxies: Option<PathBuf>,
    /// Precomputed reduced proxy; takes precedence over `proxies`.
    pub reduced_proxy: Option<PathBuf>,
    pub reduced_proxy_column: String,
    pub temperature: Option<PathBuf>,
    pub temperature_column: String,
    /// Columns `solar`, `volcanic`, `co2`.
    pub forcings: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            proxies: None,
            reduced_proxy: None,
            reduced_proxy_column: "rp".into(),
            temperature: None,
            temperature_column: "temperature".into(),
            forcings: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub calibration: Option<String>,
    pub prediction: Option<String>,
    /// Proxy standardization window; the full record when absent.
    pub standardization: Option<String>,
    /// Reduction fit window; the calibration window when absent.
    pub fit: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionSection {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    /// Proxies transformed by `log(x)`.
    pub log: Vec<String>,
    /// Proxies transformed by `log(1 - x)`.
    pub log_one_minus: Vec<String>,
    pub screen: bool,
    pub screening_level: f64,
    /// Proxy name to screening reference column; the temperature column
    /// when absent.
    pub local_reference: IndexMap<String, String>,
}

impl Default for ReductionSection {
    fn default() -> Self {
        ReductionSection {
            include: Vec::new(),
            exclude: Vec::new(),
            log: Vec::new(),
            log_one_minus: Vec::new(),
            screen: false,
            screening_level: 0.05,
            local_reference: IndexMap::new(),
        }
    }
}

/// A parsed configuration with its source location and content hash.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub base: PathBuf,
    pub hash: String,
}

pub fn parse_range(s: &Option<String>, what: &str) -> Result<Option<YearRange>> {
    s.as_deref()
        .map(|v| v.parse::<YearRange>().map_err(|e| Error::Config(format!("{what} window: {e}")).into()))
        .transpose()
}

pub fn require_range(s: &Option<String>, what: &str) -> Result<YearRange> {
    parse_range(s, what)?.ok_or_else(|| Error::Config(format!("missing `windows.{what}`")).into())
}

impl Loaded {
    pub fn from_path(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Loaded { config: Config::default(), base: PathBuf::from("."), hash: hash_bytes(b"") });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: Config =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(Loaded {
            config,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            hash: hash_bytes(text.as_bytes()),
        })
    }

    /// Resolves a data path relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn data_path(&self, p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        match p {
            Some(p) => Ok(self.resolve(p)),
            None => Err(Error::Config(format!("missing `data.{what}`")).into()),
        }
    }
}

pub fn hash_bytes(b: &[u8]) -> String {
    Sha256::digest(b).iter().map(|x| format!("{x:02x}")).collect()
}
