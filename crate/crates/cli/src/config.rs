//! Run configuration document (TOML, strict schema).
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use triagebench_core::ingest::{MAPPING_FILE, RECORDS_FILE, VIGNETTES_FILE};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `vignettes.csv`, `records.csv` and `mapping.cfg`.
    pub study_dir: Option<PathBuf>,
    pub vignettes: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    /// Pilot records used by `refine`; defaults to `records`.
    pub pilot_records: Option<PathBuf>,
    /// Simulation spec read by `simulate`.
    pub sim_spec: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Sensitivity variants (names from the mapping's `[overrides]`).
    #[serde(default)]
    pub variants: Vec<String>,
    /// Run pilot refinement inside `all`.
    #[serde(default)]
    pub refine: bool,
    pub power: Option<PowerConfig>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
    pub power: f64,
}

/// Config with every path made absolute (or relative to the working dir when
/// no config file was given).
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub vignettes: PathBuf,
    pub records: PathBuf,
    pub mapping: PathBuf,
    pub pilot_records: PathBuf,
    pub sim_spec: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.to_string().trim()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("{}: invalid run configuration", path.display()))
    }

    pub fn resolve(self, base: &Path) -> Resolved {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let study_dir = self.study_dir.as_deref().map_or_else(|| base.to_path_buf(), join);
        let pick = |explicit: &Option<PathBuf>, default: &str| {
            explicit.as_deref().map_or_else(|| study_dir.join(default), join)
        };
        let vignettes = pick(&self.vignettes, VIGNETTES_FILE);
        let records = pick(&self.records, RECORDS_FILE);
        let mapping = pick(&self.mapping, MAPPING_FILE);
        let pilot_records = self.pilot_records.as_deref().map_or_else(|| records.clone(), join);
        let sim_spec = self.sim_spec.as_deref().map(join);
        let output_dir = self.output_dir.as_deref().map(join);
        Resolved {
            config: RunConfig { output_dir, ..self },
            vignettes,
            records,
            mapping,
            pilot_records,
            sim_spec,
        }
    }
}
