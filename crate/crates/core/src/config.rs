//! TOML run configuration. Every section is optional except the schema
//! version; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::auction::AuctionConfig;
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::{QosRequirement, SystemParams};
use crate::report::SCHEMA_VERSION;
use crate::scenario::ScenarioSpec;
use crate::sim::SimConfig;
use crate::sweep::SweepSpec;
use crate::tpd::SolverSettings;

/// Where the MCS table comes from; the built-in 256-QAM table if empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsSource {
    /// CSV with `index,spectral_efficiency`; relative to the config file.
    pub table_path: Option<PathBuf>,
    /// Inline spectral efficiencies in index order.
    pub efficiencies: Option<Vec<f64>>,
}

/// A single AP-user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub mean_snr_db: f64,
    pub qos: QosRequirement,
}

impl Default for PairSpec {
    fn default() -> Self {
        Self {
            mean_snr_db: 15.0,
            qos: QosRequirement {
                arrival_rate: 10e6,
                total_delay_budget: 10e-3,
                lvp_threshold: 1e-3,
                decode_bler_threshold: 1e-3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default)]
    pub mcs: McsSource,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub auction: AuctionConfig,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub pair: PairSpec,
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub simulation: SimConfig,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: SystemParams::default(),
            mcs: McsSource::default(),
            solver: SolverSettings::default(),
            auction: AuctionConfig::default(),
            scenario: ScenarioSpec::default(),
            pair: PairSpec::default(),
            sweep: None,
            simulation: SimConfig::default(),
            base_dir: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.system.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn table(&self) -> Result<McsTable> {
        match (&self.mcs.table_path, &self.mcs.efficiencies) {
            (Some(_), Some(_)) => Err(Error::Config(
                "give either mcs.table_path or mcs.efficiencies, not both".into(),
            )),
            (Some(p), None) => {
                let path = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                McsTable::load(path)
            }
            (None, Some(e)) => McsTable::new(e),
            (None, None) => Ok(McsTable::nr_256qam()),
        }
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self.simulation.seed = seed;
        self
    }
}
