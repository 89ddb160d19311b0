//! User association as an asymmetric multi-assignment problem.
//!
//! Every user is served by exactly one AP and every AP serves at least one
//! user; the total RB cost is minimised. Costs are scaled to integers and
//! solved with a forward/reverse auction whose output carries an
//! ε-complementary-slackness certificate. With integer costs and `ε < 1/M`
//! that certificate implies optimality.
//!
//! Internally everything is kept in integer *ticks*: one tick is `ε`, and an
//! integer cost `c` becomes the benefit `-c·K` where `K = 1/ε`. Prices and
//! profits stay exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cost scale: milli-RB granularity.
pub const DEFAULT_COST_SCALE: f64 = 1000.0;

/// Dense `M × N` cost matrix; `None` marks an infeasible pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    aps: usize,
    users: usize,
    costs: Vec<Option<f64>>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let aps = rows.len();
        let users = rows.first().map_or(0, Vec::len);
        if aps == 0 {
            return Err(Error::param("cost matrix", "needs at least one AP"));
        }
        if rows.iter().any(|r| r.len() != users) {
            return Err(Error::param("cost matrix", "rows have different lengths"));
        }
        if users < aps {
            return Err(Error::param(
                "cost matrix",
                format!("needs N >= M, got M={aps}, N={users}"),
            ));
        }
        let costs: Vec<Option<f64>> = rows.into_iter().flatten().collect();
        if let Some(bad) = costs.iter().flatten().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::param(
                "cost matrix",
                format!("cost {bad} is not finite and non-negative"),
            ));
        }
        Ok(Self { aps, users, costs })
    }

    /// Convenience constructor for fully feasible matrices.
    pub fn from_finite(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&c| Some(c)).collect()).collect())
    }

    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn get(&self, ap: usize, user: usize) -> Option<f64> {
        self.costs[ap * self.users + user]
    }

    /// Users with no feasible AP.
    pub fn unservable_users(&self) -> Vec<usize> {
        (0..self.users)
            .filter(|&n| (0..self.aps).all(|m| self.get(m, n).is_none()))
            .collect()
    }

    /// Parses rows of whitespace- or comma-separated costs; `inf` marks an
    /// infeasible pair and `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|tok| {
                    if tok.eq_ignore_ascii_case("inf") {
                        Ok(None)
                    } else {
                        tok.parse::<f64>().map(Some).map_err(|e| Error::Parse {
                            path: "<cost matrix>".into(),
                            reason: format!("line {}: `{tok}`: {e}", lineno + 1),
                        })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in 0..self.aps {
            let row: Vec<String> = (0..self.users)
                .map(|n| self.get(m, n).map_or_else(|| "inf".to_string(), |c| c.to_string()))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// True objective of a user→AP map.
    pub fn objective(&self, user_to_ap: &[usize]) -> Option<f64> {
        user_to_ap.iter().enumerate().map(|(n, &m)| self.get(m, n)).sum()
    }
}

/// Costs rounded to integers at scale `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegerCosts {
    aps: usize,
    users: usize,
    costs: Vec<Option<i64>>,
    scale: f64,
}

impl IntegerCosts {
    pub fn aps(&self) -> usize {
        self.aps
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn get(&self, ap: usize, user: usize) -> Option<i64> {
        self.costs[ap * self.users + user]
    }

    pub fn feasible_users(&self, ap: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        (0..self.users).filter_map(move |n| self.get(ap, n).map(|c| (n, c)))
    }

    pub fn feasible_aps(&self, user: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        (0..self.aps).filter_map(move |m| self.get(m, user).map(|c| (m, c)))
    }

    /// `max - min` over finite entries.
    pub fn spread(&self) -> i64 {
        let finite = self.costs.iter().flatten();
        let max = finite.clone().max().copied().unwrap_or(0);
        let min = finite.min().copied().unwrap_or(0);
        max - min
    }

    pub fn objective(&self, user_to_ap: &[usize]) -> Option<i64> {
        user_to_ap.iter().enumerate().map(|(n, &m)| self.get(m, n)).sum()
    }
}

/// `round(σ · cost)` for every feasible entry.
pub fn integerize_costs(costs: &CostMatrix, scale: f64) -> Result<IntegerCosts> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::param("scale", format!("must be >= 1, got {scale}")));
    }
    // Headroom for ticks (× K) and price sums.
    let limit = (i64::MAX >> 24) as f64;
    let scaled = costs
        .costs
        .iter()
        .map(|c| match c {
            None => Ok(None),
            Some(c) => {
                let v = (scale * c).round();
                if v > limit {
                    Err(Error::CostOverflow { scale, cost: *c })
                } else {
                    Ok(Some(v as i64))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntegerCosts {
        aps: costs.aps,
        users: costs.users,
        costs: scaled,
        scale,
    })
}

/// Mutable auction state. Profits and prices are in ticks (`ε = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionState {
    /// AP serving each user, if any.
    pub assignment: Vec<Option<usize>>,
    pub ap_profits: Vec<i64>,
    pub user_prices: Vec<i64>,
    /// Supersource price `μ`; set when the reverse phase starts.
    pub supersource_price: Option<i64>,
    /// Ticks per integer cost unit (`1/ε`).
    pub ticks_per_unit: i64,
    pub forward_bids: u64,
    pub reverse_iterations: u64,
}

impl AuctionState {
    pub fn new(costs: &IntegerCosts, ticks_per_unit: i64) -> Self {
        Self {
            assignment: vec![None; costs.users()],
            ap_profits: vec![0; costs.aps()],
            user_prices: vec![0; costs.users()],
            supersource_price: None,
            ticks_per_unit,
            forward_bids: 0,
            reverse_iterations: 0,
        }
    }

    fn benefit(&self, costs: &IntegerCosts, ap: usize, user: usize) -> Option<i64> {
        costs.get(ap, user).map(|c| -c * self.ticks_per_unit)
    }

    pub fn users_of(&self, ap: usize) -> impl Iterator<Item = usize> + '_ {
        self.assignment
            .iter()
            .enumerate()
            .filter(move |(_, a)| **a == Some(ap))
            .map(|(n, _)| n)
    }

    pub fn unassigned_aps(&self) -> Vec<usize> {
        let mut held = vec![false; self.ap_profits.len()];
        for m in self.assignment.iter().flatten() {
            held[*m] = true;
        }
        (0..held.len()).filter(|&m| !held[m]).collect()
    }

    pub fn unassigned_users(&self) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&n| self.assignment[n].is_none())
            .collect()
    }

    pub fn total_iterations(&self) -> u64 {
        self.forward_bids + self.reverse_iterations
    }
}

/// Best and second-best `(index, value)` by value, lowest index on ties.
fn top_two(items: impl Iterator<Item = (usize, i64)>) -> Option<((usize, i64), Option<i64>)> {
    let mut best: Option<(usize, i64)> = None;
    let mut second: Option<i64> = None;
    for (i, v) in items {
        match best {
            None => best = Some((i, v)),
            Some((_, bv)) if v > bv => {
                second = Some(bv);
                best = Some((i, v));
            }
            Some(_) => {
                if second.is_none_or(|s| v > s) {
                    second = Some(v);
                }
            }
        }
    }
    best.map(|b| (b, second))
}

/// One forward round: every AP without users bids for its best user, and
/// each user that received bids goes to the highest bidder.
pub fn forward_round(state: &mut AuctionState, costs: &IntegerCosts) {
    let cap = (costs.spread() + 1) * state.ticks_per_unit + 1;
    let mut bids: Vec<Option<(usize, i64)>> = vec![None; costs.users()];
    for m in state.unassigned_aps() {
        let values = costs
            .feasible_users(m)
            .map(|(n, _)| (n, state.benefit(costs, m, n).unwrap() - state.user_prices[n]));
        let Some(((best, v1), v2)) = top_two(values) else {
            continue;
        };
        let increment = match v2 {
            Some(v2) => v1 - v2 + 1,
            None => cap,
        };
        let bid = state.user_prices[best] + increment;
        state.forward_bids += 1;
        if bids[best].is_none_or(|(_, b)| bid > b) {
            bids[best] = Some((m, bid));
        }
    }
    for (n, bid) in bids.into_iter().enumerate() {
        let Some((m, price)) = bid else { continue };
        state.assignment[n] = Some(m);
        state.user_prices[n] = price;
        state.ap_profits[m] = state.benefit(costs, m, n).unwrap() - price;
    }
}

/// One reverse iteration for the lowest-indexed unassigned user.
///
/// The user joins its best AP; if that AP was below the supersource price it
/// gives up its previous user, otherwise it simply takes one more.
pub fn reverse_round(state: &mut AuctionState, costs: &IntegerCosts) {
    let mu = *state
        .supersource_price
        .get_or_insert_with(|| state.ap_profits.iter().copied().max().unwrap_or(0));
    let Some(n) = state.assignment.iter().position(Option::is_none) else {
        return;
    };
    let values = costs
        .feasible_aps(n)
        .map(|(m, _)| (m, state.benefit(costs, m, n).unwrap() - state.ap_profits[m]));
    let Some(((m, beta), omega)) = top_two(values) else {
        return;
    };
    state.reverse_iterations += 1;
    let headroom = mu - state.ap_profits[m];
    let delta = match omega {
        Some(omega) => headroom.min(beta - omega + 1),
        None => headroom,
    };
    state.user_prices[n] = beta - delta;
    state.ap_profits[m] += delta;
    if delta > 0 {
        let previous: Vec<usize> = state.users_of(m).collect();
        debug_assert!(previous.len() <= 1, "AP below μ holds several users");
        for prev in previous {
            state.assignment[prev] = None;
        }
    }
    state.assignment[n] = Some(m);
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// AP index serving each user.
    pub user_to_ap: Vec<usize>,
    /// Σ cost in the caller's (unscaled) units.
    pub objective: f64,
    /// Σ integer cost at scale σ.
    pub scaled_objective: i64,
    pub scale: f64,
    /// `ε` in integer cost units.
    pub epsilon: f64,
    /// Duals in integer cost units.
    pub ap_profits: Vec<f64>,
    pub user_prices: Vec<f64>,
    pub supersource_price: f64,
    pub iterations: u64,
}

impl Assignment {
    /// Users per AP.
    pub fn loads(&self, aps: usize) -> Vec<usize> {
        let mut out = vec![0; aps];
        for &m in &self.user_to_ap {
            out[m] += 1;
        }
        out
    }

    /// Bound on `|objective - true optimum|` from rounding at scale `σ`.
    pub fn rounding_bound(&self) -> f64 {
        self.user_to_ap.len() as f64 * (0.5 + self.epsilon) / self.scale
    }
}

/// Auction tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuctionConfig {
    pub scale: f64,
    /// `K` with `ε = 1/K` in integer cost units; `None` picks `2M`.
    pub epsilon_denominator: Option<i64>,
}

impl Default for AuctionConfig {
    fn default() -> Self {
        Self {
            scale: DEFAULT_COST_SCALE,
            epsilon_denominator: None,
        }
    }
}

/// Checks that some assignment gives every user a feasible AP and every AP
/// at least one user (augmenting-path matching of APs into users).
pub fn check_feasible(costs: &IntegerCosts) -> Result<()> {
    let unservable: Vec<usize> = (0..costs.users())
        .filter(|&n| costs.feasible_aps(n).next().is_none())
        .collect();
    if !unservable.is_empty() {
        return Err(Error::Infeasible(format!(
            "users without a feasible AP: {unservable:?}"
        )));
    }
    let mut owner: Vec<Option<usize>> = vec![None; costs.users()];
    fn augment(m: usize, costs: &IntegerCosts, seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for (n, _) in costs.feasible_users(m) {
            if seen[n] {
                continue;
            }
            seen[n] = true;
            if owner[n].is_none_or(|o| augment(o, costs, seen, owner)) {
                owner[n] = Some(m);
                return true;
            }
        }
        false
    }
    for m in 0..costs.aps() {
        let mut seen = vec![false; costs.users()];
        if !augment(m, costs, &mut seen, &mut owner) {
            return Err(Error::Infeasible(format!(
                "AP {m} cannot be given a distinct feasible user"
            )));
        }
    }
    Ok(())
}

/// Hard cap on bids plus reverse iterations: `(⌈Δ/ε⌉ + 2) M N`.
pub fn iteration_cap(costs: &IntegerCosts, ticks_per_unit: i64) -> u64 {
    let ratio = (costs.spread() * ticks_per_unit) as u64;
    (ratio + 2) * (costs.aps() * costs.users()) as u64
}

/// Runs forward rounds until every AP holds a user, then reverse rounds
/// until every user is placed, repeating if an AP is ever emptied.
pub fn solve_assignment(costs: &CostMatrix, cfg: &AuctionConfig) -> Result<Assignment> {
    let int = integerize_costs(costs, cfg.scale)?;
    let (state, int) = run_auction(int, cfg)?;
    let user_to_ap: Vec<usize> = state.assignment.iter().map(|a| a.unwrap()).collect();
    let k = state.ticks_per_unit as f64;
    Ok(Assignment {
        objective: costs.objective(&user_to_ap).expect("assigned pairs are feasible"),
        scaled_objective: int.objective(&user_to_ap).expect("assigned pairs are feasible"),
        scale: int.scale(),
        epsilon: 1.0 / k,
        ap_profits: state.ap_profits.iter().map(|&p| p as f64 / k).collect(),
        user_prices: state.user_prices.iter().map(|&p| p as f64 / k).collect(),
        supersource_price: state.supersource_price.unwrap_or(0) as f64 / k,
        iterations: state.total_iterations(),
        user_to_ap,
    })
}

/// Auction on already-integer costs; returns the terminal state.
pub fn run_auction(costs: IntegerCosts, cfg: &AuctionConfig) -> Result<(AuctionState, IntegerCosts)> {
    check_feasible(&costs)?;
    let k = cfg.epsilon_denominator.unwrap_or(2 * costs.aps() as i64);
    if k <= costs.aps() as i64 {
        return Err(Error::param(
            "epsilon",
            format!("ε = 1/{k} must be below 1/M = 1/{}", costs.aps()),
        ));
    }
    let cap = iteration_cap(&costs, k);
    let mut state = AuctionState::new(&costs, k);
    let stalled = |state: &AuctionState| Error::AuctionStalled {
        cap,
        detail: format!(
            "{} forward bids, {} reverse iterations, {} APs and {} users unassigned",
            state.forward_bids,
            state.reverse_iterations,
            state.unassigned_aps().len(),
            state.unassigned_users().len()
        ),
    };
    loop {
        while !state.unassigned_aps().is_empty() {
            forward_round(&mut state, &costs);
            if state.total_iterations() > cap {
                return Err(stalled(&state));
            }
        }
        state.supersource_price = None;
        while !state.unassigned_users().is_empty() {
            reverse_round(&mut state, &costs);
            if state.total_iterations() > cap {
                return Err(stalled(&state));
            }
        }
        if state.unassigned_aps().is_empty() {
            break;
        }
    }
    Ok((state, costs))
}

/// Which ε-CS condition failed, and where.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EpsCsViolation {
    /// `π_m + p_n ≥ -c_mn - ε` fails on a feasible pair.
    Slack {
        ap: usize,
        user: usize,
    },
    /// `π_m + p_n = -c_mn` fails on an assigned pair.
    Tight {
        ap: usize,
        user: usize,
    },
    /// An AP with several users is not at the maximum profit.
    MultiPairProfit {
        ap: usize,
    },
    UnassignedUser(usize),
    IdleAp(usize),
    InfeasiblePair {
        ap: usize,
        user: usize,
    },
}

/// Checks conditions (a)–(c) plus assignment feasibility; returns the first
/// violation found.
pub fn verify_eps_cs(state: &AuctionState, costs: &IntegerCosts) -> std::result::Result<(), EpsCsViolation> {
    let k = state.ticks_per_unit;
    for m in 0..costs.aps() {
        for (n, c) in costs.feasible_users(m) {
            if state.ap_profits[m] + state.user_prices[n] < -c * k - 1 {
                return Err(EpsCsViolation::Slack { ap: m, user: n });
            }
        }
    }
    let mut load = vec![0usize; costs.aps()];
    for (n, a) in state.assignment.iter().enumerate() {
        let Some(m) = *a else {
            return Err(EpsCsViolation::UnassignedUser(n));
        };
        let Some(c) = costs.get(m, n) else {
            return Err(EpsCsViolation::InfeasiblePair { ap: m, user: n });
        };
        if state.ap_profits[m] + state.user_prices[n] != -c * k {
            return Err(EpsCsViolation::Tight { ap: m, user: n });
        }
        load[m] += 1;
    }
    let max_profit = state.ap_profits.iter().copied().max().unwrap_or(0);
    for (m, &l) in load.iter().enumerate() {
        if l == 0 {
            return Err(EpsCsViolation::IdleAp(m));
        }
        if l > 1 && state.ap_profits[m] != max_profit {
            return Err(EpsCsViolation::MultiPairProfit { ap: m });
        }
    }
    Ok(())
}

/// Exhaustive search over all user→AP maps that leave no AP idle.
pub fn brute_force_assignment(costs: &CostMatrix, scale: f64) -> Result<Assignment> {
    let (m, n) = (costs.aps(), costs.users());
    if m > 5 || n > 8 {
        return Err(Error::OracleTooLarge { m, n });
    }
    let int = integerize_costs(costs, scale)?;
    let options: Vec<Vec<(usize, i64)>> = (0..n).map(|u| int.feasible_aps(u).collect()).collect();
    if let Some(u) = options.iter().position(Vec::is_empty) {
        return Err(Error::Infeasible(format!("user {u} has no feasible AP")));
    }
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut choice = vec![0usize; n];
    loop {
        let map: Vec<usize> = choice.iter().enumerate().map(|(u, &c)| options[u][c].0).collect();
        let mut load = vec![false; m];
        map.iter().for_each(|&a| load[a] = true);
        if load.iter().all(|&l| l) {
            let obj: i64 = choice.iter().enumerate().map(|(u, &c)| options[u][c].1).sum();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, map));
            }
        }
        // Odometer increment over the per-user option lists.
        let mut u = 0;
        loop {
            if u == n {
                let Some((scaled_objective, user_to_ap)) = best else {
                    return Err(Error::Infeasible("no assignment covers every AP".into()));
                };
                return Ok(Assignment {
                    objective: costs.objective(&user_to_ap).unwrap(),
                    scaled_objective,
                    scale,
                    epsilon: 0.0,
                    ap_profits: Vec::new(),
                    user_prices: Vec::new(),
                    supersource_price: 0.0,
                    iterations: 0,
                    user_to_ap,
                });
            }
            choice[u] += 1;
            if choice[u] < options[u].len() {
                break;
            }
            choice[u] = 0;
            u += 1;
        }
    }
}
