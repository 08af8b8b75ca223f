use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::IngestConfig;
use crate::powerlaw::{TailConfig, DEFAULT_SIGNIFICANCE, DEFAULT_TAIL_MIN};
use crate::scaling::{Abscissa, DEFAULT_BINS};
use crate::stationarity::{Bandwidth, KpssConfig, KpssVariant, DEFAULT_ACTIVITY_FLOOR};

/// Which analysis stages `analyze` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub scaling: bool,
    pub powerlaw: bool,
    pub kpss: bool,
    pub taylor: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages {
            scaling: true,
            powerlaw: true,
            kpss: true,
            taylor: true,
        }
    }
}

impl Stages {
    pub fn none() -> Self {
        Stages {
            scaling: false,
            powerlaw: false,
            kpss: false,
            taylor: false,
        }
    }
}

/// Run configuration, read from TOML. Every field has a default and every
/// field can be overridden from the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub ingest: IngestConfig,
    pub stages: Stages,
    pub n_bins: usize,
    pub abscissa: Abscissa,
    pub n_tail_min: usize,
    pub significance: f64,
    pub activity_floor: usize,
    pub kpss_variant: KpssVariant,
    pub kpss_bandwidth: Bandwidth,
    /// Output directory; not echoed into reports.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            ingest: IngestConfig::default(),
            stages: Stages::default(),
            n_bins: DEFAULT_BINS,
            abscissa: Abscissa::default(),
            n_tail_min: DEFAULT_TAIL_MIN,
            significance: DEFAULT_SIGNIFICANCE,
            activity_floor: DEFAULT_ACTIVITY_FLOOR,
            kpss_variant: KpssVariant::default(),
            kpss_bandwidth: Bandwidth::default(),
            out: PathBuf::from("tokenscale-out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative input paths stay relative to the
    /// working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.ingest.validate()?;
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be >= 1".into()));
        }
        if self.n_tail_min < 2 {
            return Err(Error::Config("n_tail_min must be >= 2".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::Config(format!(
                "significance must lie in (0, 1), got {}",
                self.significance
            )));
        }
        Ok(())
    }

    pub fn tail_config(&self) -> TailConfig {
        TailConfig {
            n_tail_min: self.n_tail_min,
            significance: self.significance,
        }
    }

    pub fn kpss_config(&self) -> KpssConfig {
        KpssConfig {
            variant: self.kpss_variant,
            bandwidth: self.kpss_bandwidth,
            activity_floor: self.activity_floor,
        }
    }
}
