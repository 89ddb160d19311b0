//! Adaptive modulation and coding over a Rayleigh-faded link.
//!
//! SNR is linear throughout this module; [`db_to_linear`] and
//! [`linear_to_db`] convert at the edges. All channel-averaged quantities are
//! conditional on the channel supporting at least the lowest mode
//! (`γ ≥ γ_0`), i.e. they are normalised by the usable probability `P_T`.
//! Weights are evaluated relative to `γ_0` so that the normalisation stays
//! finite even when `P_T` itself underflows.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::SystemParams;
use crate::quadrature::{adaptive_simpson, QuadratureConfig};

/// Largest admissible BER threshold; `ln(5ρ)` vanishes there.
pub const MAX_BER_THRESHOLD: f64 = 0.2;

/// Relative weight below which the top segment's exponential tail is cut.
pub const TAIL_TRUNCATION: f64 = 1e-16;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Rayleigh block-fading channel characterised by its mean SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    mean_snr: f64,
}

impl ChannelModel {
    pub fn new(mean_snr: f64) -> Result<Self> {
        if !(mean_snr.is_finite() && mean_snr > 0.0) {
            return Err(Error::param("mean_snr", format!("must be positive, got {mean_snr}")));
        }
        Ok(Self { mean_snr })
    }

    pub fn from_db(mean_snr_db: f64) -> Result<Self> {
        Self::new(db_to_linear(mean_snr_db))
    }

    pub fn mean_snr(&self) -> f64 {
        self.mean_snr
    }

    pub fn mean_snr_db(&self) -> f64 {
        linear_to_db(self.mean_snr)
    }

    /// Exponential pdf of the instantaneous SNR.
    pub fn pdf(&self, snr: f64) -> f64 {
        if snr < 0.0 {
            0.0
        } else {
            (-snr / self.mean_snr).exp() / self.mean_snr
        }
    }
}

/// Operating point used when averaging `exp(-θ r ψ)` over the channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfContext {
    pub ber_threshold: f64,
    pub rb_count: u32,
    /// Latency exponent, 1/bits.
    pub latency_exponent: f64,
}

pub(crate) fn check_ber_threshold(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= MAX_BER_THRESHOLD {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "BER threshold {rho} outside (0, {MAX_BER_THRESHOLD}]"
        )))
    }
}

/// `1 - 2^υ`, accurate for small `υ`.
fn one_minus_pow2(v: f64) -> f64 {
    -(v * std::f64::consts::LN_2).exp_m1()
}

/// MCS switching thresholds `γ_0 < … < γ_J`, followed by a `+∞` sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingThresholds(Vec<f64>);

impl SwitchingThresholds {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Lower edge of mode `j`; `j = J + 1` yields the sentinel.
    pub fn lower(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// Number of real modes (`J + 1`).
    pub fn modes(&self) -> usize {
        self.0.len() - 1
    }

    pub fn select(&self, snr: f64) -> McsSelection {
        let finite = &self.0[..self.0.len() - 1];
        match finite.partition_point(|&g| g <= snr) {
            0 => McsSelection::Outage,
            n => McsSelection::Mode(n - 1),
        }
    }
}

/// Switching thresholds for BER target `rho`.
pub fn switching_thresholds(rho: f64, table: &McsTable) -> Result<SwitchingThresholds> {
    check_ber_threshold(rho)?;
    let log_term = (5.0 * rho).ln();
    let mut out: Vec<f64> = table
        .efficiencies()
        .map(|v| 2.0 / 3.0 * one_minus_pow2(v) * log_term)
        .collect();
    out.push(f64::INFINITY);
    Ok(SwitchingThresholds(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McsSelection {
    Mode(usize),
    Outage,
}

impl McsSelection {
    pub fn mode(self) -> Option<usize> {
        match self {
            McsSelection::Mode(j) => Some(j),
            McsSelection::Outage => None,
        }
    }
}

/// Highest mode whose threshold does not exceed `snr`.
pub fn select_mcs(snr: f64, thresholds: &SwitchingThresholds) -> McsSelection {
    thresholds.select(snr)
}

pub fn bit_error_rate(j: usize, snr: f64, table: &McsTable) -> f64 {
    let denom = -one_minus_pow2(table.efficiency(j));
    0.2 * (-1.5 * snr / denom).exp()
}

/// Probability that an `L`-bit block decodes, `(1 - Pb)^L`.
pub fn block_success(j: usize, snr: f64, block_bits: u32, table: &McsTable) -> f64 {
    let pb = bit_error_rate(j, snr, table);
    (f64::from(block_bits) * (-pb).ln_1p()).exp()
}

/// `1 - (1 - Pb)^L`, evaluated without cancellation for `Pb L ≪ 1`.
pub fn block_error_rate(j: usize, snr: f64, block_bits: u32, table: &McsTable) -> f64 {
    let pb = bit_error_rate(j, snr, table);
    -(f64::from(block_bits) * (-pb).ln_1p()).exp_m1()
}

/// `P_T = Pr{γ ≥ γ_0}`.
pub fn mcs_usable_probability(rho: f64, channel: &ChannelModel, table: &McsTable) -> Result<f64> {
    let th = switching_thresholds(rho, table)?;
    Ok((-th.lower(0) / channel.mean_snr()).exp())
}

/// Per-mode selection probabilities for one `(ρ, γ̄)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWeights {
    thresholds: SwitchingThresholds,
    /// `Pr{mode j | γ ≥ γ_0}`.
    conditional: Vec<f64>,
    usable_probability: f64,
    mean_snr: f64,
}

impl SegmentWeights {
    pub fn new(rho: f64, channel: &ChannelModel, table: &McsTable) -> Result<Self> {
        let thresholds = switching_thresholds(rho, table)?;
        let mean = channel.mean_snr();
        let g0 = thresholds.lower(0);
        let conditional = (0..thresholds.modes())
            .map(|j| {
                let lo = thresholds.lower(j);
                let hi = thresholds.lower(j + 1);
                let head = (-(lo - g0) / mean).exp();
                if hi.is_infinite() {
                    head
                } else {
                    head * -(-(hi - lo) / mean).exp_m1()
                }
            })
            .collect();
        Ok(Self {
            usable_probability: (-g0 / mean).exp(),
            thresholds,
            conditional,
            mean_snr: mean,
        })
    }

    pub fn thresholds(&self) -> &SwitchingThresholds {
        &self.thresholds
    }

    pub fn conditional(&self) -> &[f64] {
        &self.conditional
    }

    pub fn usable_probability(&self) -> f64 {
        self.usable_probability
    }

    /// Unconditional segment integrals `∫_{γ_j}^{γ_{j+1}} p_γ dγ`.
    pub fn unconditional(&self) -> Vec<f64> {
        self.conditional.iter().map(|w| w * self.usable_probability).collect()
    }

    /// `E[ψ | γ ≥ γ_0]`, bits per RB.
    pub fn expected_info_per_rb(&self, params: &SystemParams, table: &McsTable) -> f64 {
        self.conditional
            .iter()
            .zip(table.efficiencies())
            .map(|(w, v)| w * params.bits_per_rb(v))
            .sum()
    }

    /// `ln E[exp(-θ r ψ) | γ ≥ γ_0]`.
    ///
    /// Small exponents go through `ln_1p(Σ w expm1(-a))` so that the
    /// `θ → 0` limit keeps relative precision; larger ones use log-sum-exp.
    pub fn log_mgf(&self, theta: f64, rb_count: u32, params: &SystemParams, table: &McsTable) -> f64 {
        let scale = theta * f64::from(rb_count);
        let exponents: Vec<f64> = table.efficiencies().map(|v| scale * params.bits_per_rb(v)).collect();
        let norm: f64 = self.conditional.iter().sum();
        let smallest = self
            .conditional
            .iter()
            .zip(&exponents)
            .filter(|(w, _)| **w > 0.0)
            .map(|(_, a)| *a)
            .fold(f64::INFINITY, f64::min);
        if smallest < 0.5 {
            let s: f64 = self
                .conditional
                .iter()
                .zip(&exponents)
                .map(|(w, a)| w / norm * (-a).exp_m1())
                .sum();
            s.ln_1p()
        } else {
            let s: f64 = self
                .conditional
                .iter()
                .zip(&exponents)
                .map(|(w, a)| w / norm * (smallest - a).exp())
                .sum();
            -smallest + s.ln()
        }
    }

    /// Integrates `value(j, γ)` against the conditional SNR density, one
    /// adaptive pass per mode segment.
    /// Bracket on the average BLER from the segment endpoints: BLER falls
    /// with `γ` inside every segment, so its values at the segment edges
    /// bound the segment average.
    pub fn bler_bounds(&self, block_bits: u32, table: &McsTable) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 0.0);
        for (j, &w) in self.conditional.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            hi += w * block_error_rate(j, self.thresholds.lower(j), block_bits, table);
            let top = self.thresholds.lower(j + 1);
            if top.is_finite() {
                lo += w * block_error_rate(j, top, block_bits, table);
            }
        }
        (lo, hi.min(1.0))
    }

    pub fn integrate<F>(&self, value: F, cfg: &QuadratureConfig) -> Result<f64>
    where
        F: Fn(usize, f64) -> f64,
    {
        let mean = self.mean_snr;
        let g0 = self.thresholds.lower(0);
        let mut total = 0.0;
        for (j, &w) in self.conditional.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let lo = self.thresholds.lower(j);
            let mut hi = self.thresholds.lower(j + 1);
            if hi.is_infinite() {
                hi = lo + mean * (1.0 / TAIL_TRUNCATION).ln();
            }
            let q = adaptive_simpson(|g| value(j, g) * (-(g - g0) / mean).exp() / mean, lo, hi, cfg);
            if !q.converged || !q.value.is_finite() {
                return Err(Error::Quadrature {
                    segment: j,
                    lower: lo,
                    upper: hi,
                    estimate: q.value,
                    error: q.error,
                });
            }
            total += q.value;
        }
        Ok(total)
    }
}

/// Channel-averaged per-transmission BLER `P̄`.
pub fn average_bler(rho: f64, channel: &ChannelModel, block_bits: u32, table: &McsTable) -> Result<f64> {
    average_bler_with(rho, channel, block_bits, table, &QuadratureConfig::default())
}

pub fn average_bler_with(
    rho: f64,
    channel: &ChannelModel,
    block_bits: u32,
    table: &McsTable,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let seg = SegmentWeights::new(rho, channel, table)?;
    // Quadrature error can push the estimate a hair past 1 when every mode
    // is deep in its waterfall.
    Ok(seg
        .integrate(|j, g| block_error_rate(j, g, block_bits, table), cfg)?
        .clamp(0.0, 1.0))
}

/// Channel-averaged decode probability `1 - P̄`, integrated directly so it
/// keeps full relative precision when `P̄` is close to one.
pub fn average_block_success(rho: f64, channel: &ChannelModel, block_bits: u32, table: &McsTable) -> Result<f64> {
    let seg = SegmentWeights::new(rho, channel, table)?;
    seg.integrate(
        |j, g| block_success(j, g, block_bits, table),
        &QuadratureConfig::default(),
    )
}

/// `E[ψ | γ ≥ γ_0]`, bits per RB.
pub fn expected_info_per_rb(rho: f64, channel: &ChannelModel, params: &SystemParams, table: &McsTable) -> Result<f64> {
    Ok(SegmentWeights::new(rho, channel, table)?.expected_info_per_rb(params, table))
}

/// `E[exp(-θ r ψ) | γ ≥ γ_0]`.
pub fn ec_mgf(ctx: &MgfContext, channel: &ChannelModel, params: &SystemParams, table: &McsTable) -> Result<f64> {
    if !(ctx.latency_exponent >= 0.0) {
        return Err(Error::Domain(format!(
            "latency exponent must be non-negative, got {}",
            ctx.latency_exponent
        )));
    }
    let seg = SegmentWeights::new(ctx.ber_threshold, channel, table)?;
    Ok(seg.log_mgf(ctx.latency_exponent, ctx.rb_count, params, table).exp())
}

/// Spectral efficiency of an ideal code with SNR gap `-2 ln(5ρ)/3`.
pub fn shannon_gap_efficiency(snr: f64, rho: f64) -> Result<f64> {
    check_ber_threshold(rho)?;
    if rho >= MAX_BER_THRESHOLD {
        return Err(Error::Domain("SNR gap vanishes at ρ = 0.2".into()));
    }
    let gap = -2.0 * (5.0 * rho).ln() / 3.0;
    Ok((snr / gap).ln_1p() / std::f64::consts::LN_2)
}

/// Draws one SNR realisation. With `floor = Some(γ_0)` the draw is
/// conditioned on `γ ≥ γ_0` (memoryless shift of the exponential).
pub fn sample_snr<R: Rng + ?Sized>(channel: &ChannelModel, rng: &mut R, floor: Option<f64>) -> f64 {
    let e: f64 = Exp1.sample(rng);
    let draw = channel.mean_snr() * e;
    match floor {
        Some(g0) if g0 > 0.0 => g0 + draw,
        _ => draw,
    }
}
