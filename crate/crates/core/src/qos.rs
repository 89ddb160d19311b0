//! Effective-capacity statistics for a constant-rate source.
//!
//! Rates cross this module's boundary in bits/second; internally the service
//! per slot (`E[rψ]`) and the arrivals per slot (`λ T^s`) are both in bits,
//! and the latency exponent `θ` is in 1/bits.

use serde::{Deserialize, Serialize};

use crate::amc::{ChannelModel, SegmentWeights};
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::SystemParams;

/// Split of the end-to-end budget between ARQ rounds and queueing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySplit {
    pub transmissions: u32,
    /// Maximum tolerable queueing delay `D^q,th`, seconds.
    pub queue_budget: f64,
    /// `X (T^s + T^RTT)`, seconds.
    pub service_delay: f64,
}

/// Spends `X` rounds of the budget on transmissions, the rest on queueing.
/// `None` when nothing is left for the queue.
pub fn delay_split(total_budget: f64, transmissions: u32, params: &SystemParams) -> Option<DelaySplit> {
    if transmissions == 0 {
        return None;
    }
    let service_delay = f64::from(transmissions) * params.round_duration();
    let queue_budget = total_budget - service_delay;
    (queue_budget > 0.0).then_some(DelaySplit {
        transmissions,
        queue_budget,
        service_delay,
    })
}

/// Latency exponent that makes the LVP bound bind:
/// `θ = -ln(ε E[rψ] / (λ T^s)) / (λ D^q,th)`.
///
/// A non-positive result means `E[rψ] ≥ λ T^s / ε`, i.e. the operating point
/// lies above the feasibility window.
pub fn latency_exponent(
    mean_service_bits: f64,
    arrival_rate: f64,
    lvp_threshold: f64,
    queue_budget: f64,
    params: &SystemParams,
) -> f64 {
    let per_slot = params.bits_per_slot(arrival_rate);
    -(lvp_threshold * mean_service_bits / per_slot).ln() / (arrival_rate * queue_budget)
}

/// [`latency_exponent`] with `E[rψ]` evaluated at `(r, ρ, γ̄)`.
#[allow(clippy::too_many_arguments)]
pub fn latency_exponent_at(
    rb_count: u32,
    rho: f64,
    arrival_rate: f64,
    lvp_threshold: f64,
    queue_budget: f64,
    channel: &ChannelModel,
    params: &SystemParams,
    table: &McsTable,
) -> Result<f64> {
    let seg = SegmentWeights::new(rho, channel, table)?;
    let mean = f64::from(rb_count) * seg.expected_info_per_rb(params, table);
    Ok(latency_exponent(
        mean,
        arrival_rate,
        lvp_threshold,
        queue_budget,
        params,
    ))
}

/// Effective capacity in bits/second. `θ = 0` returns the mean-rate limit.
pub fn effective_capacity(
    rho: f64,
    rb_count: u32,
    theta: f64,
    channel: &ChannelModel,
    params: &SystemParams,
    table: &McsTable,
) -> Result<f64> {
    let seg = SegmentWeights::new(rho, channel, table)?;
    effective_capacity_from(&seg, rb_count, theta, params, table)
}

pub(crate) fn effective_capacity_from(
    seg: &SegmentWeights,
    rb_count: u32,
    theta: f64,
    params: &SystemParams,
    table: &McsTable,
) -> Result<f64> {
    if theta < 0.0 || theta.is_nan() {
        return Err(Error::Domain(format!("latency exponent {theta} is negative")));
    }
    if theta == 0.0 {
        return Ok(f64::from(rb_count) * seg.expected_info_per_rb(params, table) / params.slot_duration);
    }
    Ok(-seg.log_mgf(theta, rb_count, params, table) / (theta * params.slot_duration))
}

/// `min(1, φ e^{-θ λ D^q,th})` with `φ = λ T^s / E[rψ]`.
pub fn lvp_estimate(
    theta: f64,
    arrival_rate: f64,
    queue_budget: f64,
    mean_service_bits: f64,
    params: &SystemParams,
) -> f64 {
    let phi = params.bits_per_slot(arrival_rate) / mean_service_bits;
    (phi * (-theta * arrival_rate * queue_budget).exp()).clamp(0.0, 1.0)
}

/// `λ T^s < E[rψ] < λ T^s / ε`.
pub fn feasibility_window(
    mean_service_bits: f64,
    arrival_rate: f64,
    lvp_threshold: f64,
    params: &SystemParams,
) -> bool {
    let per_slot = params.bits_per_slot(arrival_rate);
    per_slot < mean_service_bits && mean_service_bits < per_slot / lvp_threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> SystemParams {
        SystemParams {
            slot_duration: 1.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn split_arithmetic() {
        let p = SystemParams::default();
        let s = delay_split(6e-3, 2, &p).unwrap();
        assert!((s.queue_budget - 2e-3).abs() < 1e-15);
        assert!((s.service_delay - 4e-3).abs() < 1e-15);
        assert!(delay_split(6e-3, 3, &p).is_none());
        assert!(delay_split(7e-3, 4, &p).is_none());
        let s = delay_split(2e-3 + 1e-4, 1, &p).unwrap();
        assert!((s.queue_budget - 1e-4).abs() < 1e-15);
        assert!(delay_split(1.0, 0, &p).is_none());
    }

    #[test]
    fn theta_cases() {
        let p = unit_params();
        // ε E / (λ T) = 1 → θ = 0.
        assert_eq!(latency_exponent(1000.0, 10.0, 0.01, 1.0, &p), 0.0);
        // ε E / (λ T) = e^{-1}, λ D = 1 → θ = 1.
        let e = (-1.0f64).exp() / 0.5;
        let th = latency_exponent(e, 1.0, 0.5, 1.0, &p);
        assert!((th - 1.0).abs() < 1e-15);
        let short = latency_exponent(50.0, 10.0, 0.01, 1.0, &p);
        let long = latency_exponent(50.0, 10.0, 0.01, 2.0, &p);
        assert!(long < short && long > 0.0);
        assert!((short / long - 2.0).abs() < 1e-12);
    }

    #[test]
    fn window_edges() {
        let p = unit_params();
        let eps = 0.1;
        assert!(!feasibility_window(10.0, 10.0, eps, &p));
        assert!(feasibility_window(10.0 * (1.0 + eps) / (2.0 * eps), 10.0, eps, &p));
        assert!(!feasibility_window(100.0, 10.0, eps, &p));
        assert!(!feasibility_window(10.0, 10.0, 1.0 - 1e-12, &p));
        assert!(!feasibility_window(10.000001, 10.0, 1.0, &p));
    }

    #[test]
    fn lvp_cases() {
        let p = unit_params();
        assert_eq!(lvp_estimate(0.0, 10.0, 3.0, 40.0, &p), 0.25);
        let v = lvp_estimate(0.1, 10.0, 3.0, 10.0, &p);
        assert!((v - (-3.0f64).exp()).abs() < 1e-15);
        assert_eq!(lvp_estimate(0.0, 10.0, 3.0, 5.0, &p), 1.0);
    }

    #[test]
    fn single_mode_capacity_is_rate() {
        let t = McsTable::new(&[2.0]).unwrap();
        let p = SystemParams::default();
        let ch = ChannelModel::from_db(10.0).unwrap();
        for &theta in &[1e-6, 1e-4, 1e-2] {
            let f = effective_capacity(1e-3, 4, theta, &ch, &p, &t).unwrap();
            let rate = 4.0 * 336.0 / p.slot_duration;
            assert!((f - rate).abs() / rate < 1e-12, "θ={theta}: {f}");
        }
    }

    #[test]
    fn capacity_falls_with_theta_and_stays_below_mean() {
        let t = McsTable::nr_256qam();
        let p = SystemParams::default();
        let ch = ChannelModel::from_db(12.0).unwrap();
        let mean = effective_capacity(1e-3, 10, 0.0, &ch, &p, &t).unwrap();
        let tiny = effective_capacity(1e-3, 10, 1e-9, &ch, &p, &t).unwrap();
        let big = effective_capacity(1e-3, 10, 1e-3, &ch, &p, &t).unwrap();
        assert!(big < tiny && tiny <= mean);
        assert!((mean - tiny) / mean < 1e-5);
        assert!(effective_capacity(1e-3, 10, -1.0, &ch, &p, &t).is_err());
    }
}
