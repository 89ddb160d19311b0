//! Per-pair transmission parameter decision.
//!
//! For every admissible transmission count `X` and RB count `r` the BER
//! threshold is found by bisection on the effective-capacity constraint, with
//! the latency exponent re-derived from the LVP bound at every probe. The
//! cheapest configuration that also meets the residual-BLER, feasibility
//! window and RB-budget constraints wins.

use serde::{Deserialize, Serialize};

use crate::amc::{average_bler_with, check_ber_threshold, ChannelModel, SegmentWeights};
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::{QosRequirement, SystemParams};
use crate::qos::{
    delay_split, effective_capacity_from, feasibility_window, latency_exponent, lvp_estimate, DelaySplit,
};
use crate::quadrature::QuadratureConfig;

pub const DEFAULT_RHO_MIN: f64 = 1e-9;
pub const DEFAULT_RHO_MAX: f64 = 0.199;
pub const DEFAULT_BISECTION_TOLERANCE: f64 = 1e-9;

/// Everything needed to size one AP-user link.
#[derive(Debug, Clone, PartialEq)]
pub struct PairContext {
    pub channel: ChannelModel,
    pub qos: QosRequirement,
    pub params: SystemParams,
    pub table: McsTable,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Bisection stops once the bracket is this narrow.
    pub bisection_tolerance: f64,
    /// Skip RB counts above the best cost found so far.
    pub early_break: bool,
    pub quadrature: QuadratureConfig,
}

impl PairContext {
    pub fn new(channel: ChannelModel, qos: QosRequirement, params: SystemParams, table: McsTable) -> Result<Self> {
        let ctx = Self {
            channel,
            qos,
            params,
            table,
            rho_min: DEFAULT_RHO_MIN,
            rho_max: DEFAULT_RHO_MAX,
            bisection_tolerance: DEFAULT_BISECTION_TOLERANCE,
            early_break: true,
            quadrature: QuadratureConfig::default(),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.qos.validate(&self.params)?;
        if !(0.0 < self.rho_min && self.rho_min < self.rho_max && self.rho_max < 0.2) {
            return Err(Error::param(
                "rho bounds",
                format!("need 0 < {} < {} < 0.2", self.rho_min, self.rho_max),
            ));
        }
        if !(self.bisection_tolerance > 0.0) {
            return Err(Error::param("bisection_tolerance", "must be positive"));
        }
        Ok(())
    }

    /// Largest `X` whose service delay still leaves a queueing budget,
    /// capped at `params.max_transmissions`.
    pub fn max_transmissions(&self) -> u32 {
        (1..=self.params.max_transmissions)
            .take_while(|&x| delay_split(self.qos.total_delay_budget, x, &self.params).is_some())
            .last()
            .unwrap_or(0)
    }

    /// Evaluates the coupled `(θ, F^ec)` at one BER threshold.
    pub fn probe(&self, rho: f64, rb_count: u32, split: &DelaySplit) -> Result<Probe> {
        let seg = SegmentWeights::new(rho, &self.channel, &self.table)?;
        let mean_service_bits = f64::from(rb_count) * seg.expected_info_per_rb(&self.params, &self.table);
        let theta = latency_exponent(
            mean_service_bits,
            self.qos.arrival_rate,
            self.qos.lvp_threshold,
            split.queue_budget,
            &self.params,
        );
        // Above the window the LVP bound holds even at θ = 0; the capacity
        // there is the mean rate, which already exceeds λ/ε.
        let capacity = if theta > 0.0 {
            effective_capacity_from(&seg, rb_count, theta, &self.params, &self.table)?
        } else {
            mean_service_bits / self.params.slot_duration
        };
        Ok(Probe {
            rho,
            latency_exponent: theta,
            mean_service_bits,
            capacity,
        })
    }

    pub fn average_bler(&self, rho: f64) -> Result<f64> {
        average_bler_with(
            rho,
            &self.channel,
            self.params.code_block_bits,
            &self.table,
            &self.quadrature,
        )
    }
}

/// Search knobs that callers may override from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub rho_min: f64,
    pub rho_max: f64,
    pub bisection_tolerance: f64,
    pub early_break: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho_min: DEFAULT_RHO_MIN,
            rho_max: DEFAULT_RHO_MAX,
            bisection_tolerance: DEFAULT_BISECTION_TOLERANCE,
            early_break: true,
        }
    }
}

impl SolverSettings {
    /// Builds a validated context for one link.
    pub fn context(
        &self,
        channel: ChannelModel,
        qos: QosRequirement,
        params: SystemParams,
        table: McsTable,
    ) -> Result<PairContext> {
        let ctx = PairContext {
            channel,
            qos,
            params,
            table,
            rho_min: self.rho_min,
            rho_max: self.rho_max,
            bisection_tolerance: self.bisection_tolerance,
            early_break: self.early_break,
            quadrature: QuadratureConfig::default(),
        };
        ctx.validate()?;
        Ok(ctx)
    }
}

/// One evaluation of the effective-capacity constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub rho: f64,
    /// 1/bits; non-positive above the feasibility window.
    pub latency_exponent: f64,
    /// `E[rψ]`, bits per slot.
    pub mean_service_bits: f64,
    /// `F^ec`, bits/second.
    pub capacity: f64,
}

/// Result of the BER-threshold bisection for fixed `(r, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BerThreshold {
    /// Upper end of the final bracket; `F^ec(rho) ≥ λ`.
    pub rho: f64,
    pub probe: Probe,
    pub steps: u32,
}

/// Optimal configuration of one AP-user pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpdSolution {
    pub rb_count: u32,
    pub ber_threshold: f64,
    pub transmissions: u32,
    /// 1/bits.
    pub latency_exponent: f64,
    /// Seconds.
    pub queue_budget: f64,
    /// Mean RBs per slot including retransmissions.
    pub expected_cost: f64,
    pub mean_bler: f64,
    /// `E[rψ]`, bits per slot.
    pub mean_service_bits: f64,
    /// Bits/second.
    pub effective_capacity: f64,
}

/// `r (1 - P̄^X) / (1 - P̄)`: mean RBs over `X` ARQ rounds.
pub fn expected_rb_cost(rb_count: u32, mean_bler: f64, transmissions: u32) -> f64 {
    let r = f64::from(rb_count);
    if transmissions <= 64 {
        // Horner form of Σ_{x<X} P̄^x; no cancellation near P̄ = 1.
        let sum = (1..transmissions).fold(1.0, |acc, _| 1.0 + mean_bler * acc);
        r * sum
    } else {
        r * (1.0 - mean_bler.powf(f64::from(transmissions))) / (1.0 - mean_bler)
    }
}

/// Bisects on `ρ` so that `F^ec(ρ) ≥ λ` with a bracket no wider than the
/// context tolerance. `None` when even `ρ_max` falls short of `λ`.
pub fn solve_ber_threshold(rb_count: u32, transmissions: u32, ctx: &PairContext) -> Result<Option<BerThreshold>> {
    solve_ber_threshold_traced(rb_count, transmissions, ctx, |_| {})
}

/// [`solve_ber_threshold`] reporting every probe to `on_probe`.
pub fn solve_ber_threshold_traced<F>(
    rb_count: u32,
    transmissions: u32,
    ctx: &PairContext,
    mut on_probe: F,
) -> Result<Option<BerThreshold>>
where
    F: FnMut(&Probe),
{
    let Some(split) = delay_split(ctx.qos.total_delay_budget, transmissions, &ctx.params) else {
        return Ok(None);
    };
    let lambda = ctx.qos.arrival_rate;
    let top = ctx.probe(ctx.rho_max, rb_count, &split)?;
    on_probe(&top);
    if top.capacity < lambda {
        return Ok(None);
    }
    let (mut lo, mut hi) = (ctx.rho_min, ctx.rho_max);
    let mut at_hi = top;
    let mut steps = 0;
    while hi - lo > ctx.bisection_tolerance {
        let mid = 0.5 * (lo + hi);
        let p = ctx.probe(mid, rb_count, &split)?;
        on_probe(&p);
        steps += 1;
        if p.capacity < lambda {
            lo = mid;
        } else {
            hi = mid;
            at_hi = p;
        }
    }
    Ok(Some(BerThreshold {
        rho: hi,
        probe: at_hi,
        steps,
    }))
}

/// Checks every remaining constraint at `(r, ρ, X)` and returns the
/// candidate solution if they all hold.
fn admit(
    rb_count: u32,
    transmissions: u32,
    probe: &Probe,
    split: &DelaySplit,
    mean_bler: f64,
    ctx: &PairContext,
) -> Option<TpdSolution> {
    if mean_bler.powi(transmissions as i32) > ctx.qos.decode_bler_threshold {
        return None;
    }
    if !(probe.latency_exponent > 0.0)
        || !feasibility_window(
            probe.mean_service_bits,
            ctx.qos.arrival_rate,
            ctx.qos.lvp_threshold,
            &ctx.params,
        )
    {
        return None;
    }
    let cost = expected_rb_cost(rb_count, mean_bler, transmissions);
    if cost > f64::from(ctx.params.total_rbs) {
        return None;
    }
    Some(TpdSolution {
        rb_count,
        ber_threshold: probe.rho,
        transmissions,
        latency_exponent: probe.latency_exponent,
        queue_budget: split.queue_budget,
        expected_cost: cost,
        mean_bler,
        mean_service_bits: probe.mean_service_bits,
        effective_capacity: probe.capacity,
    })
}

/// Bandwidth-minimal configuration for one pair, or `None` if no
/// `(X, r, ρ)` satisfies every constraint.
///
/// Ties on cost keep the earliest candidate in `(X, r)` order.
pub fn solve_pair(ctx: &PairContext) -> Result<Option<TpdSolution>> {
    let mut best: Option<TpdSolution> = None;
    for transmissions in 1..=ctx.max_transmissions() {
        let Some(split) = delay_split(ctx.qos.total_delay_budget, transmissions, &ctx.params) else {
            break;
        };
        for rb_count in 1..=ctx.params.total_rbs {
            if ctx.early_break {
                if let Some(b) = &best {
                    if f64::from(rb_count) > b.expected_cost {
                        break;
                    }
                }
            }
            let Some(found) = solve_ber_threshold(rb_count, transmissions, ctx)? else {
                continue;
            };
            // The endpoint bracket on P̄ rules out most candidates without a
            // quadrature; only provably losing or inadmissible ones are skipped.
            let (bler_floor, _) = SegmentWeights::new(found.rho, &ctx.channel, &ctx.table)?
                .bler_bounds(ctx.params.code_block_bits, &ctx.table);
            if bler_floor.powi(transmissions as i32) > ctx.qos.decode_bler_threshold
                || best.is_some_and(|b| expected_rb_cost(rb_count, bler_floor, transmissions) >= b.expected_cost)
            {
                continue;
            }
            let mean_bler = ctx.average_bler(found.rho)?;
            let Some(candidate) = admit(rb_count, transmissions, &found.probe, &split, mean_bler, ctx) else {
                continue;
            };
            if best.is_none_or(|b| candidate.expected_cost < b.expected_cost) {
                best = Some(candidate);
            }
        }
    }
    Ok(best)
}

/// Cheapest configuration with `ρ` and `X` pinned; only `r` is searched.
pub fn evaluate_fixed_config(ctx: &PairContext, rho: f64, transmissions: u32) -> Result<Option<TpdSolution>> {
    check_ber_threshold(rho)?;
    let Some(split) = delay_split(ctx.qos.total_delay_budget, transmissions, &ctx.params) else {
        return Ok(None);
    };
    let mean_bler = ctx.average_bler(rho)?;
    if mean_bler.powi(transmissions as i32) > ctx.qos.decode_bler_threshold {
        return Ok(None);
    }
    for rb_count in 1..=ctx.params.total_rbs {
        let probe = ctx.probe(rho, rb_count, &split)?;
        if probe.capacity < ctx.qos.arrival_rate {
            continue;
        }
        return Ok(admit(rb_count, transmissions, &probe, &split, mean_bler, ctx));
    }
    Ok(None)
}

/// A constraint that a solution fails on independent re-evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ResidualBler { residual: f64, limit: f64 },
    Window { mean_service_bits: f64 },
    NonPositiveExponent(f64),
    Capacity { capacity: f64, arrival_rate: f64 },
    Lvp { estimate: f64, limit: f64 },
    Delay { used: f64, budget: f64 },
    RbBudget { cost: f64, limit: u32 },
    Cost { stored: f64, recomputed: f64 },
}

/// Re-derives every constraint of a solution from scratch.
pub fn certify(solution: &TpdSolution, ctx: &PairContext) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    let q = &ctx.qos;
    let p = &ctx.params;
    let seg = SegmentWeights::new(solution.ber_threshold, &ctx.channel, &ctx.table)?;
    let mean = f64::from(solution.rb_count) * seg.expected_info_per_rb(p, &ctx.table);
    let theta = latency_exponent(mean, q.arrival_rate, q.lvp_threshold, solution.queue_budget, p);
    let bler = ctx.average_bler(solution.ber_threshold)?;

    let residual = bler.powi(solution.transmissions as i32);
    if residual > q.decode_bler_threshold {
        out.push(Violation::ResidualBler {
            residual,
            limit: q.decode_bler_threshold,
        });
    }
    if !feasibility_window(mean, q.arrival_rate, q.lvp_threshold, p) {
        out.push(Violation::Window {
            mean_service_bits: mean,
        });
    }
    if !(theta > 0.0) {
        out.push(Violation::NonPositiveExponent(theta));
        return Ok(out);
    }
    let capacity = effective_capacity_from(&seg, solution.rb_count, theta, p, &ctx.table)?;
    if capacity < q.arrival_rate * (1.0 - 1e-12) {
        out.push(Violation::Capacity {
            capacity,
            arrival_rate: q.arrival_rate,
        });
    }
    let lvp = lvp_estimate(theta, q.arrival_rate, solution.queue_budget, mean, p);
    if lvp > q.lvp_threshold * (1.0 + 1e-9) {
        out.push(Violation::Lvp {
            estimate: lvp,
            limit: q.lvp_threshold,
        });
    }
    let used = f64::from(solution.transmissions) * p.round_duration() + solution.queue_budget;
    if used > q.total_delay_budget * (1.0 + 1e-12) {
        out.push(Violation::Delay {
            used,
            budget: q.total_delay_budget,
        });
    }
    let cost = expected_rb_cost(solution.rb_count, bler, solution.transmissions);
    if cost > f64::from(p.total_rbs) {
        out.push(Violation::RbBudget {
            cost,
            limit: p.total_rbs,
        });
    }
    if (cost - solution.expected_cost).abs() > 1e-9 * cost {
        out.push(Violation::Cost {
            stored: solution.expected_cost,
            recomputed: cost,
        });
    }
    Ok(out)
}
