//! Slot-level Monte Carlo of one AP-user link.
//!
//! Two modes: a block simulator that samples per-attempt decode failures,
//! and a queue simulator that runs a fluid FIFO in integer bits with
//! deadline discards and ARQ bookkeeping. Every run is fully determined by
//! its seed.

use std::collections::VecDeque;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amc::{block_error_rate, sample_snr, switching_thresholds, ChannelModel, McsSelection};
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::{QosRequirement, SystemParams};
use crate::tpd::TpdSolution;

/// Run length, seed and channel-draw convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_slots: u64,
    pub n_blocks: u64,
    pub seed: u64,
    /// Draw `γ` conditioned on `γ ≥ γ_0`; otherwise outage slots carry
    /// nothing.
    pub conditioned_draws: bool,
    /// Keep per-slot records (queue mode only).
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_slots: 100_000,
            n_blocks: 1_000_000,
            seed: 1,
            conditioned_draws: true,
            record_trace: false,
        }
    }
}

/// One link realisation: the MCS picked for a draw and whether it decoded.
struct Link<'a> {
    channel: &'a ChannelModel,
    table: &'a McsTable,
    thresholds: crate::amc::SwitchingThresholds,
    floor: Option<f64>,
    block_bits: u32,
}

struct Attempt {
    snr: f64,
    mode: Option<usize>,
    failed: bool,
}

impl<'a> Link<'a> {
    fn new(
        rho: f64,
        channel: &'a ChannelModel,
        table: &'a McsTable,
        params: &SystemParams,
        conditioned: bool,
    ) -> Result<Self> {
        let thresholds = switching_thresholds(rho, table)?;
        let floor = conditioned.then(|| thresholds.lower(0));
        Ok(Self {
            channel,
            table,
            thresholds,
            floor,
            block_bits: params.code_block_bits,
        })
    }

    fn attempt<R: Rng>(&self, rng: &mut R) -> Attempt {
        let snr = sample_snr(self.channel, rng, self.floor);
        match self.thresholds.select(snr) {
            McsSelection::Mode(j) => {
                let p = block_error_rate(j, snr, self.block_bits, self.table);
                Attempt {
                    snr,
                    mode: Some(j),
                    failed: rng.random::<f64>() < p,
                }
            }
            McsSelection::Outage => Attempt {
                snr,
                mode: None,
                failed: true,
            },
        }
    }
}

/// Binomial proportion with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub std_error: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64) -> Self {
        let n = trials.max(1) as f64;
        let p = successes as f64 / n;
        Self {
            successes,
            trials,
            estimate: p,
            std_error: (p * (1.0 - p) / n).sqrt(),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn finish(&self) -> MeanEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        MeanEstimate {
            samples: self.n,
            mean: self.mean,
            std_error: (var / self.n.max(1) as f64).sqrt(),
        }
    }
}

/// Block-level statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerStats {
    /// First-attempt failures over all blocks.
    pub per_transmission: Proportion,
    /// Blocks failing all `X` attempts.
    pub residual: Proportion,
    /// Information bits per RB of the selected mode (zero in outage).
    pub info_per_rb: MeanEstimate,
    pub outages: u64,
}

/// Sends `n_blocks` blocks, each with up to `X` independent attempts on
/// fresh channel draws.
pub fn run_block_sim(
    solution: &TpdSolution,
    channel: &ChannelModel,
    params: &SystemParams,
    table: &McsTable,
    cfg: &SimConfig,
) -> Result<BlerStats> {
    let link = Link::new(solution.ber_threshold, channel, table, params, cfg.conditioned_draws)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut first_fail, mut residual, mut outages) = (0u64, 0u64, 0u64);
    let mut info = Running::default();
    for _ in 0..cfg.n_blocks {
        let first = link.attempt(&mut rng);
        info.push(first.mode.map_or(0.0, |j| params.bits_per_rb(table.efficiency(j))));
        outages += u64::from(first.mode.is_none());
        first_fail += u64::from(first.failed);
        let mut failed = first.failed;
        for _ in 1..solution.transmissions {
            if !failed {
                break;
            }
            failed = link.attempt(&mut rng).failed;
        }
        residual += u64::from(failed);
    }
    Ok(BlerStats {
        per_transmission: Proportion::new(first_fail, cfg.n_blocks),
        residual: Proportion::new(residual, cfg.n_blocks),
        info_per_rb: info.finish(),
        outages,
    })
}

/// FIFO of `(bits, arrival slot)` segments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueState {
    segments: VecDeque<(u64, u64)>,
    backlog: u64,
    pub deadline_dropped: u64,
    pub residual_lost: u64,
}

impl QueueState {
    pub fn backlog(&self) -> u64 {
        self.backlog
    }

    pub fn segments(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.segments.iter().copied()
    }

    pub fn enqueue(&mut self, bits: u64, slot: u64) {
        if bits > 0 {
            self.segments.push_back((bits, slot));
            self.backlog += bits;
        }
    }

    /// Discards head segments that arrived more than `max_age` slots ago.
    /// Returns the bits dropped and the arrival slot of the youngest one.
    pub fn drop_expired(&mut self, now: u64, max_age: u64) -> (u64, Option<u64>) {
        let mut dropped = 0;
        let mut youngest = None;
        while let Some(&(bits, at)) = self.segments.front() {
            if now - at <= max_age {
                break;
            }
            self.segments.pop_front();
            dropped += bits;
            youngest = Some(at);
        }
        self.backlog -= dropped;
        self.deadline_dropped += dropped;
        (dropped, youngest)
    }

    /// Removes up to `capacity` bits from the head; returns bits served and
    /// the age in slots of the oldest served bit.
    pub fn serve(&mut self, capacity: u64, now: u64) -> (u64, Option<u64>) {
        let mut left = capacity;
        let oldest = self.segments.front().map(|&(_, at)| now - at);
        while left > 0 {
            let Some(front) = self.segments.front_mut() else { break };
            let take = front.0.min(left);
            front.0 -= take;
            left -= take;
            if front.0 == 0 {
                self.segments.pop_front();
            }
        }
        let served = capacity - left;
        self.backlog -= served;
        (served, if served > 0 { oldest } else { None })
    }
}

/// Per-slot record; units are in the CSV header names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    #[serde(rename = "snr_linear")]
    pub snr: f64,
    /// `-1` in outage.
    pub mcs: i64,
    #[serde(rename = "initial_rbs_rb")]
    pub initial_rbs: u32,
    #[serde(rename = "retx_rbs_rb")]
    pub retx_rbs: u32,
    #[serde(rename = "arrived_bits_bit")]
    pub arrived_bits: u64,
    #[serde(rename = "served_bits_bit")]
    pub served_bits: u64,
    #[serde(rename = "dropped_bits_bit")]
    pub dropped_bits: u64,
    #[serde(rename = "lost_bits_bit")]
    pub lost_bits: u64,
}

impl SlotRecord {
    pub fn total_rbs(&self) -> u32 {
        self.initial_rbs + self.retx_rbs
    }
}

/// Queue-level statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub slots: u64,
    pub arrived_bits: u64,
    pub served_bits: u64,
    pub deadline_dropped_bits: u64,
    /// Served bits whose every ARQ attempt failed; part of `served_bits`.
    pub residual_lost_bits: u64,
    pub final_backlog_bits: u64,
    /// Deadline-dropped bits over arrived bits.
    pub empirical_lvp: f64,
    pub mean_backlog_bits: f64,
    /// RBs per slot, initial plus retransmissions.
    pub rbs_per_slot: MeanEstimate,
    pub bandwidth_hz: f64,
    pub outage_slots: u64,
    /// Oldest served bit across the run, slots.
    pub max_served_age_slots: u64,
    /// Youngest dropped bit across the run, slots.
    pub min_dropped_age_slots: Option<u64>,
    /// Largest initial allocation seen in one slot.
    pub peak_initial_rbs: u32,
    pub trace: Vec<SlotRecord>,
}

impl QueueStats {
    /// `arrived = served + dropped + backlog`.
    pub fn conserves_bits(&self) -> bool {
        self.arrived_bits == self.served_bits + self.deadline_dropped_bits + self.final_backlog_bits
    }
}

/// Cumulative arrivals `⌊t λ T^s⌋` so fractional bits never accumulate error.
fn cumulative_arrivals(slot: u64, bits_per_slot: f64) -> u64 {
    (slot as f64 * bits_per_slot).floor() as u64
}

/// Runs the queue for `n_slots` slots.
///
/// Each slot: arrivals join the tail; head segments older than `D^q,th`
/// are discarded; a fresh channel draw fixes the mode and `⌊r ψ_j⌋` bits
/// are served. A failed block is retried on fresh draws up to `X` attempts,
/// with every retry charged `r` RBs to this slot. Blocks that never decode
/// count as residual loss.
pub fn run_queue_sim(
    solution: &TpdSolution,
    qos: &QosRequirement,
    channel: &ChannelModel,
    params: &SystemParams,
    table: &McsTable,
    cfg: &SimConfig,
) -> Result<QueueStats> {
    if cfg.n_slots == 0 {
        return Err(Error::Empty("simulation needs at least one slot"));
    }
    let link = Link::new(solution.ber_threshold, channel, table, params, cfg.conditioned_draws)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per_slot = params.bits_per_slot(qos.arrival_rate);
    // Largest age in whole slots that is still within the queueing budget.
    let max_age = (solution.queue_budget / params.slot_duration * (1.0 + 1e-12)).floor() as u64;
    let r = solution.rb_count;

    let mut q = QueueState::default();
    let mut rbs = Running::default();
    let mut backlog_sum = 0.0;
    let (mut arrived, mut served_total, mut outages) = (0u64, 0u64, 0u64);
    let mut max_served_age = 0;
    let mut min_dropped_age: Option<u64> = None;
    let mut trace = Vec::new();
    let mut peak_initial = 0;

    for t in 0..cfg.n_slots {
        let a = cumulative_arrivals(t + 1, per_slot) - cumulative_arrivals(t, per_slot);
        q.enqueue(a, t);
        arrived += a;
        let (dropped, youngest) = q.drop_expired(t, max_age);
        if let Some(at) = youngest {
            let age = t - at;
            min_dropped_age = Some(min_dropped_age.map_or(age, |m: u64| m.min(age)));
        }

        let first = link.attempt(&mut rng);
        let mut record = SlotRecord {
            slot: t,
            snr: first.snr,
            mcs: first.mode.map_or(-1, |j| j as i64),
            initial_rbs: 0,
            retx_rbs: 0,
            arrived_bits: a,
            served_bits: 0,
            dropped_bits: dropped,
            lost_bits: 0,
        };
        match first.mode {
            None => outages += 1,
            Some(j) => {
                let capacity = (f64::from(r) * params.bits_per_rb(table.efficiency(j))).floor() as u64;
                let (served, oldest) = q.serve(capacity, t);
                if served > 0 {
                    record.initial_rbs = r;
                    peak_initial = r;
                    max_served_age = max_served_age.max(oldest.unwrap_or(0));
                    let mut failed = first.failed;
                    for _ in 1..solution.transmissions {
                        if !failed {
                            break;
                        }
                        record.retx_rbs += r;
                        failed = link.attempt(&mut rng).failed;
                    }
                    if failed {
                        record.lost_bits = served;
                        q.residual_lost += served;
                    }
                }
                record.served_bits = served;
                served_total += served;
            }
        }
        rbs.push(f64::from(record.total_rbs()));
        backlog_sum += q.backlog() as f64;
        if cfg.record_trace {
            trace.push(record);
        }
    }
    let rbs_per_slot = rbs.finish();
    Ok(QueueStats {
        slots: cfg.n_slots,
        arrived_bits: arrived,
        served_bits: served_total,
        deadline_dropped_bits: q.deadline_dropped,
        residual_lost_bits: q.residual_lost,
        final_backlog_bits: q.backlog(),
        empirical_lvp: q.deadline_dropped as f64 / arrived.max(1) as f64,
        mean_backlog_bits: backlog_sum / cfg.n_slots as f64,
        bandwidth_hz: rbs_per_slot.mean * params.hertz_per_rb(),
        rbs_per_slot,
        outage_slots: outages,
        max_served_age_slots: max_served_age,
        min_dropped_age_slots: min_dropped_age,
        peak_initial_rbs: peak_initial,
        trace,
    })
}

/// Mean RBs per slot and the bandwidth they occupy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub mean_rbs: f64,
    pub hertz: f64,
}

pub fn measure_bandwidth(trace: &[SlotRecord], params: &SystemParams) -> Result<Bandwidth> {
    if trace.is_empty() {
        return Err(Error::Empty("bandwidth needs a non-empty trace"));
    }
    let total: f64 = trace.iter().map(|r| f64::from(r.total_rbs())).sum();
    let mean_rbs = total / trace.len() as f64;
    Ok(Bandwidth {
        mean_rbs,
        hertz: mean_rbs * params.hertz_per_rb(),
    })
}

/// Writes the trace as CSV, one row per slot.
pub fn write_trace<W: Write>(trace: &[SlotRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(r).map_err(|e| Error::Parse {
            path: "<trace>".into(),
            reason: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<trace>", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solution(rb_count: u32, rho: f64, transmissions: u32, queue_budget: f64) -> TpdSolution {
        TpdSolution {
            rb_count,
            ber_threshold: rho,
            transmissions,
            latency_exponent: 1e-6,
            queue_budget,
            expected_cost: f64::from(rb_count),
            mean_bler: 0.0,
            mean_service_bits: 0.0,
            effective_capacity: 0.0,
        }
    }

    fn qos(rate: f64) -> QosRequirement {
        QosRequirement {
            arrival_rate: rate,
            total_delay_budget: 10e-3,
            lvp_threshold: 1e-2,
            decode_bler_threshold: 1e-3,
        }
    }

    #[test]
    fn queue_serves_fifo_and_drops_old_heads() {
        let mut q = QueueState::default();
        q.enqueue(100, 0);
        q.enqueue(50, 1);
        q.enqueue(0, 2);
        assert_eq!(q.serve(30, 1), (30, Some(1)));
        assert_eq!(q.backlog(), 120);
        assert_eq!(q.drop_expired(3, 2), (70, Some(0)));
        assert_eq!(q.segments().collect::<Vec<_>>(), vec![(50, 1)]);
        assert_eq!(q.serve(500, 3), (50, Some(2)));
        assert_eq!(q.backlog(), 0);
        assert_eq!(q.serve(10, 4), (0, None));
    }

    #[test]
    fn arrivals_sum_exactly() {
        let per_slot = 12.3;
        let total: u64 = (0..1000)
            .map(|t| cumulative_arrivals(t + 1, per_slot) - cumulative_arrivals(t, per_slot))
            .sum();
        assert_eq!(total, 12300);
    }

    #[test]
    fn dominant_service_never_drops() {
        let table = McsTable::new(&[2.0]).unwrap();
        let params = SystemParams::default();
        let channel = ChannelModel::from_db(60.0).unwrap();
        // 10 RBs × 336 bits ≫ 1000 bits per slot at 2 Mbps.
        let s = solution(10, 1e-3, 1, 2e-3);
        let cfg = SimConfig {
            n_slots: 10_000,
            record_trace: true,
            ..SimConfig::default()
        };
        let st = run_queue_sim(&s, &qos(2e6), &channel, &params, &table, &cfg).unwrap();
        assert_eq!(st.empirical_lvp, 0.0);
        assert!(st.conserves_bits());
        assert!(st.trace.iter().all(|r| r.arrived_bits + 1 >= st.final_backlog_bits));
        assert!(st.mean_backlog_bits <= 1000.0);
        let bw = measure_bandwidth(&st.trace, &params).unwrap();
        assert_eq!(bw.mean_rbs, 10.0);
        assert!((bw.hertz - 10.0 * 360e3).abs() < 1e-6);
    }

    #[test]
    fn overload_drops_the_excess_fraction() {
        let table = McsTable::new(&[1.0]).unwrap();
        let params = SystemParams::default();
        let channel = ChannelModel::from_db(60.0).unwrap();
        // Service 2 × 168 = 336 bits per slot against 1000 arriving.
        let s = solution(2, 1e-3, 1, 2e-3);
        let cfg = SimConfig {
            n_slots: 100_000,
            ..SimConfig::default()
        };
        let st = run_queue_sim(&s, &qos(2e6), &channel, &params, &table, &cfg).unwrap();
        assert!(st.conserves_bits());
        assert!((st.empirical_lvp - (1.0 - 336.0 / 1000.0)).abs() < 1e-3);
        assert!(st.max_served_age_slots <= 4);
        assert!(st.min_dropped_age_slots.unwrap() > 4);
    }

    #[test]
    fn same_seed_same_run() {
        let table = McsTable::nr_256qam();
        let params = SystemParams::default();
        let channel = ChannelModel::from_db(10.0).unwrap();
        let s = solution(8, 1e-2, 2, 4e-3);
        let cfg = SimConfig {
            n_slots: 5_000,
            record_trace: true,
            ..SimConfig::default()
        };
        let a = run_queue_sim(&s, &qos(5e6), &channel, &params, &table, &cfg).unwrap();
        let b = run_queue_sim(&s, &qos(5e6), &channel, &params, &table, &cfg).unwrap();
        assert_eq!(a, b);
        let c = run_queue_sim(&s, &qos(5e6), &channel, &params, &table, &SimConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.trace, c.trace);
        let mut buf = Vec::new();
        write_trace(&a.trace[..3], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("slot,snr_linear,mcs,initial_rbs_rb,retx_rbs_rb,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn unconditioned_draws_see_outages() {
        let table = McsTable::nr_256qam();
        let params = SystemParams::default();
        let channel = ChannelModel::from_db(0.0).unwrap();
        let s = solution(8, 1e-3, 1, 4e-3);
        let cfg = SimConfig {
            n_slots: 5_000,
            n_blocks: 5_000,
            conditioned_draws: false,
            ..SimConfig::default()
        };
        let q = run_queue_sim(&s, &qos(1e6), &channel, &params, &table, &cfg).unwrap();
        assert!(q.outage_slots > 0);
        assert!(q.conserves_bits());
        let b = run_block_sim(&s, &channel, &params, &table, &cfg).unwrap();
        assert!(b.outages > 0);
        let cond = run_block_sim(
            &s,
            &channel,
            &params,
            &table,
            &SimConfig {
                conditioned_draws: true,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(cond.outages, 0);
    }

    #[test]
    fn vanishing_failures_at_high_snr() {
        let table = McsTable::nr_256qam();
        let params = SystemParams::default();
        let channel = ChannelModel::from_db(80.0).unwrap();
        let s = solution(4, 1e-9, 1, 4e-3);
        let cfg = SimConfig {
            n_blocks: 100_000,
            ..SimConfig::default()
        };
        let b = run_block_sim(&s, &channel, &params, &table, &cfg).unwrap();
        assert_eq!(b.per_transmission.successes, 0);
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(measure_bandwidth(&[], &SystemParams::default()).is_err());
    }
}
