//! End-to-end network planning: size every AP-user pair, then associate
//! users to APs by auction, with a best-channel baseline for comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amc::ChannelModel;
use crate::auction::{
    integerize_costs, solve_assignment, verify_eps_cs, Assignment, AuctionConfig, AuctionState, CostMatrix,
    EpsCsViolation,
};
use crate::error::{Error, Result};
use crate::report::{Cell, Column, Table};
use crate::scenario::Scenario;
use crate::tpd::{certify, solve_pair, SolverSettings, TpdSolution, Violation};

/// Per-AP totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApLoad {
    pub ap: usize,
    pub users: usize,
    /// RBs/slot.
    pub cost: f64,
}

/// An association with its totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub user_to_ap: Vec<usize>,
    /// RBs/slot.
    pub total_cost: f64,
    /// Hertz.
    pub total_bandwidth: f64,
    pub loads: Vec<ApLoad>,
}

impl Association {
    fn new(user_to_ap: Vec<usize>, costs: &CostMatrix, hertz_per_rb: f64) -> Self {
        let mut loads: Vec<ApLoad> = (0..costs.aps())
            .map(|ap| ApLoad {
                ap,
                users: 0,
                cost: 0.0,
            })
            .collect();
        for (n, &m) in user_to_ap.iter().enumerate() {
            loads[m].users += 1;
            loads[m].cost += costs.get(m, n).expect("association uses feasible pairs");
        }
        let total_cost = costs.objective(&user_to_ap).expect("association uses feasible pairs");
        Self {
            user_to_ap,
            total_cost,
            total_bandwidth: total_cost * hertz_per_rb,
            loads,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// `pairs[m][n]`; `None` when the pair cannot meet the user's QoS.
    pub pairs: Vec<Vec<Option<TpdSolution>>>,
    pub costs: CostMatrix,
    pub assignment: Assignment,
    pub auction: Association,
    /// Best-channel association repaired so every AP serves a user; `None`
    /// if the repair fails.
    pub best_channel: Option<Association>,
}

/// Sizes all `M × N` pairs in parallel.
pub fn solve_pairs(scenario: &Scenario, settings: &SolverSettings) -> Result<Vec<Vec<Option<TpdSolution>>>> {
    let (m, n) = (scenario.aps.len(), scenario.users.len());
    let flat: Vec<Option<TpdSolution>> = (0..m * n)
        .into_par_iter()
        .map(|k| {
            let (ap, user) = (k / n, k % n);
            let ctx = settings.context(
                ChannelModel::new(scenario.mean_snr[ap][user])?,
                scenario.users[user].qos,
                scenario.params,
                scenario.table.clone(),
            )?;
            solve_pair(&ctx)
        })
        .collect::<Result<_>>()?;
    Ok(flat.chunks(n).map(<[_]>::to_vec).collect())
}

pub fn cost_matrix(pairs: &[Vec<Option<TpdSolution>>]) -> Result<CostMatrix> {
    CostMatrix::new(
        pairs
            .iter()
            .map(|row| row.iter().map(|s| s.map(|s| s.expected_cost)).collect())
            .collect(),
    )
}

/// Each user picks its strongest feasible AP; idle APs then take, one at a
/// time, the user from a multiply-loaded AP whose move costs least.
pub fn best_channel_association(scenario: &Scenario, costs: &CostMatrix) -> Option<Vec<usize>> {
    let (m, n) = (costs.aps(), costs.users());
    let mut map: Vec<usize> = (0..n)
        .map(|u| {
            (0..m).filter(|&a| costs.get(a, u).is_some()).max_by(|&a, &b| {
                scenario.mean_snr[a][u]
                    .total_cmp(&scenario.mean_snr[b][u])
                    .then(b.cmp(&a))
            })
        })
        .collect::<Option<_>>()?;
    loop {
        let mut load = vec![0usize; m];
        map.iter().for_each(|&a| load[a] += 1);
        let Some(idle) = (0..m).find(|&a| load[a] == 0) else {
            return Some(map);
        };
        let (user, _) = (0..n)
            .filter(|&u| load[map[u]] > 1)
            .filter_map(|u| Some((u, costs.get(idle, u)? - costs.get(map[u], u)?)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
        map[user] = idle;
    }
}

/// Sizes every pair, runs the auction and the baseline, and re-verifies the
/// result before returning it.
pub fn plan_network(scenario: &Scenario, settings: &SolverSettings, auction: &AuctionConfig) -> Result<Plan> {
    scenario.validate()?;
    let pairs = solve_pairs(scenario, settings)?;
    let costs = cost_matrix(&pairs)?;
    let unservable = costs.unservable_users();
    if !unservable.is_empty() {
        return Err(Error::Infeasible(format!(
            "users without a feasible AP: {unservable:?}"
        )));
    }
    let assignment = solve_assignment(&costs, auction)?;
    let hz = scenario.params.hertz_per_rb();
    let plan = Plan {
        schema_version: crate::report::SCHEMA_VERSION,
        scenario: scenario.clone(),
        auction: Association::new(assignment.user_to_ap.clone(), &costs, hz),
        best_channel: best_channel_association(scenario, &costs).map(|m| Association::new(m, &costs, hz)),
        pairs,
        costs,
        assignment,
    };
    let issues = verify_plan(&plan, settings)?;
    if !issues.is_empty() {
        return Err(Error::Domain(format!("plan failed re-verification: {issues:?}")));
    }
    Ok(plan)
}

/// A problem found by [`verify_plan`].
#[derive(Debug, Clone, PartialEq)]
pub enum PlanIssue {
    Pair {
        ap: usize,
        user: usize,
        violations: Vec<Violation>,
    },
    MissingPair {
        ap: usize,
        user: usize,
    },
    EpsCs(EpsCsViolation),
    Objective {
        stored: f64,
        recomputed: f64,
    },
}

/// Rebuilds the integer auction state behind an [`Assignment`].
pub fn auction_state(
    assignment: &Assignment,
    costs: &CostMatrix,
) -> Result<(AuctionState, crate::auction::IntegerCosts)> {
    let int = integerize_costs(costs, assignment.scale)?;
    let k = (1.0 / assignment.epsilon).round() as i64;
    let ticks = |v: &f64| (v * k as f64).round() as i64;
    let mut state = AuctionState::new(&int, k);
    state.assignment = assignment.user_to_ap.iter().map(|&m| Some(m)).collect();
    state.ap_profits = assignment.ap_profits.iter().map(ticks).collect();
    state.user_prices = assignment.user_prices.iter().map(ticks).collect();
    state.supersource_price = Some(ticks(&assignment.supersource_price));
    Ok((state, int))
}

/// Re-checks every assigned pair's constraints and the assignment's ε-CS
/// certificate from scratch.
pub fn verify_plan(plan: &Plan, settings: &SolverSettings) -> Result<Vec<PlanIssue>> {
    let s = &plan.scenario;
    let mut issues = Vec::new();
    for (user, &ap) in plan.assignment.user_to_ap.iter().enumerate() {
        let Some(sol) = plan.pairs[ap][user] else {
            issues.push(PlanIssue::MissingPair { ap, user });
            continue;
        };
        let ctx = settings.context(
            ChannelModel::new(s.mean_snr[ap][user])?,
            s.users[user].qos,
            s.params,
            s.table.clone(),
        )?;
        let violations = certify(&sol, &ctx)?;
        if !violations.is_empty() {
            issues.push(PlanIssue::Pair { ap, user, violations });
        }
    }
    let (state, int) = auction_state(&plan.assignment, &plan.costs)?;
    if let Err(v) = verify_eps_cs(&state, &int) {
        issues.push(PlanIssue::EpsCs(v));
    }
    if let Some(recomputed) = plan.costs.objective(&plan.assignment.user_to_ap) {
        if recomputed != plan.assignment.objective {
            issues.push(PlanIssue::Objective {
                stored: plan.assignment.objective,
                recomputed,
            });
        }
    }
    Ok(issues)
}

/// One row per user: serving AP and the pair's transmission parameters.
pub fn assignment_table(plan: &Plan) -> Table {
    let mut t = Table::new(
        "assignment",
        vec![
            Column::new("user", "1"),
            Column::new("class", "1"),
            Column::new("ap", "1"),
            Column::new("mean_snr", "dB"),
            Column::new("arrival_rate", "bit/s"),
            Column::new("total_delay_budget", "s"),
            Column::new("lvp_threshold", "1"),
            Column::new("rb_count", "RB"),
            Column::new("ber_threshold", "1"),
            Column::new("transmissions", "1"),
            Column::new("latency_exponent", "1/bit"),
            Column::new("rb_cost", "RB/slot"),
            Column::new("bandwidth", "Hz"),
            Column::new("best_channel_ap", "1"),
        ],
    );
    let hz = plan.scenario.params.hertz_per_rb();
    for (n, &m) in plan.assignment.user_to_ap.iter().enumerate() {
        let u = &plan.scenario.users[n];
        let sol = plan.pairs[m][n].expect("verified plans only assign feasible pairs");
        t.push(vec![
            n.into(),
            u.class.label().into(),
            m.into(),
            crate::amc::linear_to_db(plan.scenario.mean_snr[m][n]).into(),
            u.qos.arrival_rate.into(),
            u.qos.total_delay_budget.into(),
            u.qos.lvp_threshold.into(),
            sol.rb_count.into(),
            sol.ber_threshold.into(),
            sol.transmissions.into(),
            sol.latency_exponent.into(),
            sol.expected_cost.into(),
            (sol.expected_cost * hz).into(),
            plan.best_channel.as_ref().map(|b| b.user_to_ap[n]).into(),
        ]);
    }
    t
}

/// Totals for the auction and the baseline.
pub fn summary_table(plan: &Plan) -> Table {
    let mut t = Table::new(
        "summary",
        vec![
            Column::new("strategy", "1"),
            Column::new("total_cost", "RB/slot"),
            Column::new("total_bandwidth", "Hz"),
            Column::new("idle_aps", "1"),
            Column::new("max_users_per_ap", "1"),
        ],
    );
    let mut row = |name: &str, a: Option<&Association>| {
        t.push(vec![
            name.into(),
            a.map(|a| a.total_cost).into(),
            a.map(|a| a.total_bandwidth).into(),
            a.map(|a| a.loads.iter().filter(|l| l.users == 0).count()).into(),
            a.and_then(|a| a.loads.iter().map(|l| l.users).max()).into(),
        ]);
    };
    row("auction", Some(&plan.auction));
    row("best_channel", plan.best_channel.as_ref());
    t.rows.push(vec![
        Cell::Text("rounding_bound".into()),
        plan.assignment.rounding_bound().into(),
        Cell::Missing,
        Cell::Missing,
        Cell::Missing,
    ]);
    t
}

/// Per-AP load and cost.
pub fn load_table(plan: &Plan) -> Table {
    let mut t = Table::new(
        "ap_load",
        vec![
            Column::new("ap", "1"),
            Column::new("users", "1"),
            Column::new("cost", "RB/slot"),
        ],
    );
    for l in &plan.auction.loads {
        t.push(vec![l.ap.into(), l.users.into(), l.cost.into()]);
    }
    t
}
