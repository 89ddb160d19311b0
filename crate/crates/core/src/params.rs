//! System constants and per-user QoS targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot, resource-block and frame constants shared by every AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    /// Scheduling slot length, seconds.
    pub slot_duration: f64,
    /// Delay from a transmission to its ACK/NACK, seconds.
    pub feedback_rtt: f64,
    /// Subcarriers per RB.
    pub subcarriers_per_rb: u32,
    /// OFDM symbols per RB.
    pub symbols_per_rb: u32,
    /// Data symbols per slot.
    pub data_symbols_per_slot: u32,
    /// Subcarrier spacing, hertz.
    pub subcarrier_spacing: f64,
    /// RBs available per slot.
    pub total_rbs: u32,
    /// Code block length, bits.
    pub code_block_bits: u32,
    /// Upper bound on ARQ transmissions.
    pub max_transmissions: u32,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            slot_duration: 0.5e-3,
            feedback_rtt: 1.5e-3,
            subcarriers_per_rb: 12,
            symbols_per_rb: 14,
            data_symbols_per_slot: 14,
            subcarrier_spacing: 30e3,
            total_rbs: 273,
            code_block_bits: 1024,
            max_transmissions: 8,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("slot_duration", self.slot_duration)?;
        positive("feedback_rtt", self.feedback_rtt)?;
        positive("subcarrier_spacing", self.subcarrier_spacing)?;
        for (name, v) in [
            ("subcarriers_per_rb", self.subcarriers_per_rb),
            ("symbols_per_rb", self.symbols_per_rb),
            ("data_symbols_per_slot", self.data_symbols_per_slot),
            ("total_rbs", self.total_rbs),
            ("code_block_bits", self.code_block_bits),
            ("max_transmissions", self.max_transmissions),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Symbols carried by one RB (`α β`).
    pub fn symbols_per_block(&self) -> f64 {
        f64::from(self.subcarriers_per_rb) * f64::from(self.symbols_per_rb)
    }

    /// Bits carried by one RB in a mode with the given spectral efficiency.
    pub fn bits_per_rb(&self, spectral_efficiency: f64) -> f64 {
        self.symbols_per_block() * spectral_efficiency
    }

    /// Duration of one transmission round (`T^s + T^RTT`).
    pub fn round_duration(&self) -> f64 {
        self.slot_duration + self.feedback_rtt
    }

    /// Bandwidth occupied by one RB, hertz.
    pub fn hertz_per_rb(&self) -> f64 {
        self.symbols_per_block() * self.subcarrier_spacing / f64::from(self.data_symbols_per_slot)
    }

    /// Converts a rate in bits/second to bits per slot.
    pub fn bits_per_slot(&self, rate_bps: f64) -> f64 {
        rate_bps * self.slot_duration
    }
}

/// Traffic and QoS targets of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosRequirement {
    /// Constant source rate, bits/second.
    pub arrival_rate: f64,
    /// End-to-end delay budget (queueing + service), seconds.
    pub total_delay_budget: f64,
    /// Tolerated latency violation probability.
    pub lvp_threshold: f64,
    /// Residual BLER below which FEC decodes successfully.
    pub decode_bler_threshold: f64,
}

impl QosRequirement {
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return Err(Error::param("arrival_rate", "must be positive"));
        }
        if !(self.total_delay_budget > params.round_duration()) {
            return Err(Error::param(
                "total_delay_budget",
                format!(
                    "{} s leaves no room for one transmission of {} s",
                    self.total_delay_budget,
                    params.round_duration()
                ),
            ));
        }
        for (name, v) in [
            ("lvp_threshold", self.lvp_threshold),
            ("decode_bler_threshold", self.decode_bler_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}
