//! One-dimensional parameter sweeps comparing the joint search against
//! pinned `(ρ, X)` configurations and a Shannon-gap baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amc::{db_to_linear, shannon_gap_efficiency, ChannelModel, TAIL_TRUNCATION};
use crate::error::{Error, Result};
use crate::mcs::McsTable;
use crate::params::{QosRequirement, SystemParams};
use crate::qos::{delay_split, feasibility_window, latency_exponent};
use crate::quadrature::adaptive_simpson;
use crate::report::{Cell, Column, Table};
use crate::tpd::{evaluate_fixed_config, solve_pair, PairContext, SolverSettings, TpdSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SourceRate,
    TotalDelay,
    LvpThreshold,
    DecodeBler,
    MeanSnr,
}

impl SweepAxis {
    pub fn column(self) -> Column {
        match self {
            SweepAxis::SourceRate => Column::new("source_rate", "bit/s"),
            SweepAxis::TotalDelay => Column::new("total_delay", "s"),
            SweepAxis::LvpThreshold => Column::new("lvp_threshold", "1"),
            SweepAxis::DecodeBler => Column::new("decode_bler", "1"),
            SweepAxis::MeanSnr => Column::new("mean_snr", "dB"),
        }
    }
}

/// A pinned `(ρ, X)` comparison point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedConfig {
    pub rho: f64,
    pub transmissions: u32,
}

impl FixedConfig {
    pub fn label(&self) -> String {
        format!("fixed_rho{:e}_x{}", self.rho, self.transmissions)
    }

    /// `ρ ∈ {1e-5, 1e-3}` × `X ∈ {1, 2, 3}`.
    pub fn default_set() -> Vec<FixedConfig> {
        [1e-5, 1e-3]
            .into_iter()
            .flat_map(|rho| (1..=3).map(move |transmissions| FixedConfig { rho, transmissions }))
            .collect()
    }
}

pub const CROSS_LAYER: &str = "cross_layer";
pub const SHANNON_IFC: &str = "shannon_ifc";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Context for the axes not being swept.
    pub qos: QosRequirement,
    pub mean_snr_db: f64,
    #[serde(default = "FixedConfig::default_set")]
    pub fixed: Vec<FixedConfig>,
    #[serde(default = "default_true")]
    pub ifc: bool,
    #[serde(default = "default_ifc_rho")]
    pub ifc_rho: f64,
}

fn default_true() -> bool {
    true
}

fn default_ifc_rho() -> f64 {
    1e-3
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, qos: QosRequirement, mean_snr_db: f64) -> Self {
        Self {
            axis,
            values,
            qos,
            mean_snr_db,
            fixed: FixedConfig::default_set(),
            ifc: true,
            ifc_rho: default_ifc_rho(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() < 3 {
            return Err(Error::param("values", "a sweep needs at least 3 points"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("values", "grid must be strictly increasing"));
        }
        Ok(())
    }

    /// QoS and mean SNR (dB) at one grid value.
    pub fn point(&self, value: f64) -> (QosRequirement, f64) {
        let mut q = self.qos;
        let mut snr = self.mean_snr_db;
        match self.axis {
            SweepAxis::SourceRate => q.arrival_rate = value,
            SweepAxis::TotalDelay => q.total_delay_budget = value,
            SweepAxis::LvpThreshold => q.lvp_threshold = value,
            SweepAxis::DecodeBler => q.decode_bler_threshold = value,
            SweepAxis::MeanSnr => snr = value,
        }
        (q, snr)
    }
}

/// One (grid value, strategy) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub strategy: String,
    pub solution: Option<TpdSolution>,
    /// Hertz; `None` when infeasible.
    pub bandwidth: Option<f64>,
}

/// Smallest integer `r` whose effective capacity under the continuous
/// Shannon-gap rate meets `λ`, with one transmission and no outage.
pub fn shannon_ifc_baseline(ctx: &PairContext, rho: f64) -> Result<Option<TpdSolution>> {
    let Some(split) = delay_split(ctx.qos.total_delay_budget, 1, &ctx.params) else {
        return Ok(None);
    };
    let p = &ctx.params;
    let mean_snr = ctx.channel.mean_snr();
    let top = mean_snr * (1.0 / TAIL_TRUNCATION).ln();
    // Surface the domain check once instead of inside the integrand.
    shannon_gap_efficiency(1.0, rho)?;
    let psi = |g: f64| p.bits_per_rb(shannon_gap_efficiency(g, rho).unwrap_or(0.0));
    let integrate = |f: &dyn Fn(f64) -> f64| -> Result<f64> {
        let q = adaptive_simpson(|g| ctx.channel.pdf(g) * f(g), 0.0, top, &ctx.quadrature);
        if !q.converged {
            return Err(Error::Quadrature {
                segment: 0,
                lower: 0.0,
                upper: top,
                estimate: q.value,
                error: q.error,
            });
        }
        Ok(q.value)
    };
    let mean_per_rb = integrate(&psi)?;
    let lambda = ctx.qos.arrival_rate;
    for r in 1..=p.total_rbs {
        let rf = f64::from(r);
        let mean = rf * mean_per_rb;
        let theta = latency_exponent(mean, lambda, ctx.qos.lvp_threshold, split.queue_budget, p);
        if !(theta > 0.0) {
            // Larger r only moves further above the window.
            return Ok(None);
        }
        let mgf = integrate(&|g| (-theta * rf * psi(g)).exp())?;
        let capacity = -mgf.ln() / (theta * p.slot_duration);
        if capacity >= lambda && feasibility_window(mean, lambda, ctx.qos.lvp_threshold, p) {
            return Ok(Some(TpdSolution {
                rb_count: r,
                ber_threshold: rho,
                transmissions: 1,
                latency_exponent: theta,
                queue_budget: split.queue_budget,
                expected_cost: rf,
                mean_bler: 0.0,
                mean_service_bits: mean,
                effective_capacity: capacity,
            }));
        }
    }
    Ok(None)
}

fn evaluate_point(
    spec: &SweepSpec,
    value: f64,
    params: &SystemParams,
    table: &McsTable,
    settings: &SolverSettings,
) -> Result<Vec<SweepRow>> {
    let (qos, snr_db) = spec.point(value);
    let ctx = settings.context(ChannelModel::new(db_to_linear(snr_db))?, qos, *params, table.clone())?;
    let row = |strategy: String, solution: Option<TpdSolution>| SweepRow {
        value,
        strategy,
        bandwidth: solution.map(|s| s.expected_cost * params.hertz_per_rb()),
        solution,
    };
    let mut rows = vec![row(CROSS_LAYER.into(), solve_pair(&ctx)?)];
    for f in &spec.fixed {
        rows.push(row(f.label(), evaluate_fixed_config(&ctx, f.rho, f.transmissions)?));
    }
    if spec.ifc {
        rows.push(row(SHANNON_IFC.into(), shannon_ifc_baseline(&ctx, spec.ifc_rho)?));
    }
    Ok(rows)
}

/// Evaluates every strategy at every grid value (points in parallel).
/// Infeasible points are recorded, not fatal.
pub fn run_sweep(
    spec: &SweepSpec,
    params: &SystemParams,
    table: &McsTable,
    settings: &SolverSettings,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let per_point: Vec<Vec<SweepRow>> = spec
        .values
        .par_iter()
        .map(|&v| evaluate_point(spec, v, params, table, settings))
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

/// Tidy table: one row per (grid value, strategy).
pub fn sweep_table(name: &str, axis: SweepAxis, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(
        name,
        vec![
            axis.column(),
            Column::new("strategy", "1"),
            Column::new("feasible", "1"),
            Column::new("rb_cost", "RB/slot"),
            Column::new("bandwidth", "Hz"),
            Column::new("rb_count", "RB"),
            Column::new("ber_threshold", "1"),
            Column::new("transmissions", "1"),
            Column::new("latency_exponent", "1/bit"),
            Column::new("queue_budget", "s"),
            Column::new("mean_bler", "1"),
            Column::new("effective_capacity", "bit/s"),
        ],
    );
    for r in rows {
        let s = r.solution.as_ref();
        t.push(vec![
            r.value.into(),
            r.strategy.as_str().into(),
            Cell::Num(if s.is_some() { 1.0 } else { 0.0 }),
            s.map(|s| s.expected_cost).into(),
            r.bandwidth.into(),
            s.map(|s| s.rb_count).into(),
            s.map(|s| s.ber_threshold).into(),
            s.map(|s| s.transmissions).into(),
            s.map(|s| s.latency_exponent).into(),
            s.map(|s| s.queue_budget).into(),
            s.map(|s| s.mean_bler).into(),
            s.map(|s| s.effective_capacity).into(),
        ]);
    }
    t
}

/// Relative saving of the joint search over the cheapest feasible fixed
/// configuration at each grid value.
pub fn gains(rows: &[SweepRow]) -> Vec<(f64, Option<f64>)> {
    let mut values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    values.dedup();
    values
        .into_iter()
        .map(|v| {
            let at = || rows.iter().filter(move |r| r.value == v);
            let cross = at().find(|r| r.strategy == CROSS_LAYER).and_then(|r| r.bandwidth);
            let fixed = at()
                .filter(|r| r.strategy.starts_with("fixed_"))
                .filter_map(|r| r.bandwidth)
                .fold(None, |acc: Option<f64>, b| Some(acc.map_or(b, |a| a.min(b))));
            (v, cross.zip(fixed).map(|(c, f)| (f - c) / f))
        })
        .collect()
}
