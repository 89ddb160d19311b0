//! MCS tables: ordered modes with strictly increasing spectral efficiency.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_TABLE: &str = include_str!("../data/mcs_256qam.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsMode {
    pub index: usize,
    /// Bits per modulation symbol.
    pub spectral_efficiency: f64,
}

/// Ordered list of MCS modes. Index runs `0..=J`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct McsTable {
    modes: Vec<McsMode>,
}

impl McsTable {
    /// Builds a table from spectral efficiencies listed in index order.
    pub fn new(efficiencies: &[f64]) -> Result<Self> {
        let modes = efficiencies
            .iter()
            .enumerate()
            .map(|(index, &spectral_efficiency)| McsMode {
                index,
                spectral_efficiency,
            })
            .collect();
        Self::from_modes(modes)
    }

    pub fn from_modes(modes: Vec<McsMode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidTable("table has no modes".into()));
        }
        for (pos, mode) in modes.iter().enumerate() {
            if mode.index != pos {
                return Err(Error::InvalidTable(format!(
                    "mode at position {pos} has index {}, expected {pos}",
                    mode.index
                )));
            }
            if !(mode.spectral_efficiency.is_finite() && mode.spectral_efficiency > 0.0) {
                return Err(Error::InvalidTable(format!(
                    "mode {pos} has non-positive spectral efficiency {}",
                    mode.spectral_efficiency
                )));
            }
        }
        if let Some(w) = modes
            .windows(2)
            .find(|w| w[1].spectral_efficiency <= w[0].spectral_efficiency)
        {
            return Err(Error::InvalidTable(format!(
                "spectral efficiency not strictly increasing at index {}",
                w[1].index
            )));
        }
        Ok(Self { modes })
    }

    /// The 28-mode 256QAM table of 3GPP TS 38.214 Table 5.1.3.1-2.
    pub fn nr_256qam() -> Self {
        Self::parse_csv(DEFAULT_TABLE.as_bytes()).expect("bundled MCS table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&bytes[..]).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    /// Parses `index,spectral_efficiency` records (header required).
    pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut modes = Vec::new();
        for record in rdr.deserialize::<McsMode>() {
            let mode = record.map_err(|e| Error::Parse {
                path: "<mcs table>".into(),
                reason: e.to_string(),
            })?;
            modes.push(mode);
        }
        Self::from_modes(modes)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,spectral_efficiency\n");
        for m in &self.modes {
            out.push_str(&format!("{},{}\n", m.index, m.spectral_efficiency));
        }
        out
    }

    pub fn modes(&self) -> &[McsMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest index `J`.
    pub fn top(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn efficiency(&self, j: usize) -> f64 {
        self.modes[j].spectral_efficiency
    }

    pub fn efficiencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.modes.iter().map(|m| m.spectral_efficiency)
    }
}

impl Default for McsTable {
    fn default() -> Self {
        Self::nr_256qam()
    }
}

impl<'de> Deserialize<'de> for McsTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let modes = Vec::<McsMode>::deserialize(d)?;
        McsTable::from_modes(modes).map_err(serde::de::Error::custom)
    }
}
