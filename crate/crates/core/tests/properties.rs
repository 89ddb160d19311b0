//! Randomised invariants across the crate.

use proptest::prelude::*;

use cran_xlayer::amc::{
    bit_error_rate, db_to_linear, ec_mgf, expected_info_per_rb, linear_to_db, switching_thresholds, ChannelModel,
    MgfContext, SegmentWeights,
};
use cran_xlayer::auction::{
    brute_force_assignment, forward_round, integerize_costs, run_auction, solve_assignment, verify_eps_cs,
    AuctionConfig, AuctionState, CostMatrix,
};
use cran_xlayer::qos::{delay_split, effective_capacity, feasibility_window, lvp_estimate};
use cran_xlayer::report::{Cell, Column, Table};
use cran_xlayer::sim::{run_queue_sim, SimConfig};
use cran_xlayer::tpd::{certify, expected_rb_cost, solve_ber_threshold_traced, solve_pair, PairContext, TpdSolution};
use cran_xlayer::{McsTable, QosRequirement, SystemParams};

fn table() -> McsTable {
    McsTable::nr_256qam()
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn threshold_identity(rho in log_uniform(1e-12, 0.19), j in 0usize..28) {
        let t = table();
        let th = switching_thresholds(rho, &t).unwrap();
        let pb = bit_error_rate(j, th.lower(j), &t);
        prop_assert!(((pb - rho) / rho).abs() <= 1e-12, "{pb} vs {rho}");
    }

    #[test]
    fn thresholds_fall_as_rho_rises(a in log_uniform(1e-10, 0.19), b in log_uniform(1e-10, 0.19)) {
        prop_assume!(a < b);
        let t = table();
        let (ta, tb) = (switching_thresholds(a, &t).unwrap(), switching_thresholds(b, &t).unwrap());
        for j in 0..t.len() {
            prop_assert!(tb.lower(j) < ta.lower(j));
            if j > 0 {
                prop_assert!(ta.lower(j - 1) < ta.lower(j));
            }
        }
    }

    #[test]
    fn db_round_trip(db in -40.0f64..80.0) {
        let back = linear_to_db(db_to_linear(db));
        prop_assert!((back - db).abs() <= 1e-12 * db.abs().max(1.0));
    }

    #[test]
    fn segment_weights_normalised(rho in log_uniform(1e-9, 0.19), db in -10.0f64..40.0) {
        let ch = ChannelModel::from_db(db).unwrap();
        let seg = SegmentWeights::new(rho, &ch, &table()).unwrap();
        let total: f64 = seg.conditional().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-14 * 28.0);
        prop_assert!(seg.conditional().iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn mgf_bounds_and_monotonicity(
        rho in log_uniform(1e-8, 0.19),
        db in 0.0f64..30.0,
        r in 1u32..60,
        theta in log_uniform(1e-8, 1e-2),
    ) {
        let (ch, p, t) = (ChannelModel::from_db(db).unwrap(), SystemParams::default(), table());
        let mgf = |r, theta| ec_mgf(&MgfContext { ber_threshold: rho, rb_count: r, latency_exponent: theta }, &ch, &p, &t).unwrap();
        let base = mgf(r, theta);
        prop_assert!(base > 0.0 && base <= 1.0);
        prop_assert!(mgf(r, 2.0 * theta) <= base);
        prop_assert!(mgf(r + 1, theta) <= base);
        prop_assert_eq!(mgf(r, 0.0), 1.0);
    }

    #[test]
    fn info_per_rb_non_decreasing(a in log_uniform(1e-9, 0.19), b in log_uniform(1e-9, 0.19), db in -5.0f64..35.0) {
        prop_assume!(a < b);
        let (ch, p, t) = (ChannelModel::from_db(db).unwrap(), SystemParams::default(), table());
        let ea = expected_info_per_rb(a, &ch, &p, &t).unwrap();
        let eb = expected_info_per_rb(b, &ch, &p, &t).unwrap();
        prop_assert!(eb >= ea * (1.0 - 1e-12));
        prop_assert!(ea > 0.0);
    }

    #[test]
    fn capacity_below_mean_rate_and_falls_with_theta(
        rho in log_uniform(1e-8, 0.19),
        db in 0.0f64..30.0,
        r in 1u32..40,
        theta in log_uniform(1e-7, 1e-3),
    ) {
        let (ch, p, t) = (ChannelModel::from_db(db).unwrap(), SystemParams::default(), table());
        let mean = f64::from(r) * expected_info_per_rb(rho, &ch, &p, &t).unwrap() / p.slot_duration;
        let f1 = effective_capacity(rho, r, theta, &ch, &p, &t).unwrap();
        let f2 = effective_capacity(rho, r, 2.0 * theta, &ch, &p, &t).unwrap();
        prop_assert!(f1 > 0.0);
        prop_assert!(f1 <= mean * (1.0 + 1e-12));
        prop_assert!(f2 <= f1 * (1.0 + 1e-12));
        let near_zero = effective_capacity(rho, r, 1e-9, &ch, &p, &t).unwrap();
        prop_assert!(near_zero >= f1 * (1.0 - 1e-12));
    }

    #[test]
    fn lvp_estimate_is_a_probability(
        theta in 0.0f64..1e-2,
        rate in 1e5f64..1e8,
        dq in 1e-4f64..2e-2,
        mean in 1.0f64..1e6,
    ) {
        let v = lvp_estimate(theta, rate, dq, mean, &SystemParams::default());
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn window_is_strict(rate in 1e5f64..1e8, eps in log_uniform(1e-6, 0.5)) {
        let p = SystemParams::default();
        let per_slot = p.bits_per_slot(rate);
        prop_assert!(!feasibility_window(per_slot, rate, eps, &p));
        prop_assert!(!feasibility_window(per_slot / eps, rate, eps, &p));
        prop_assert!(feasibility_window(per_slot * (1.0 + eps) / (2.0 * eps), rate, eps, &p));
    }

    #[test]
    fn delay_split_accounts_for_budget(total in 2.1e-3f64..3e-2, x in 1u32..10) {
        let p = SystemParams::default();
        match delay_split(total, x, &p) {
            Some(s) => {
                prop_assert!(s.queue_budget > 0.0);
                prop_assert!((s.queue_budget + s.service_delay - total).abs() < 1e-15);
            }
            None => prop_assert!(f64::from(x) * p.round_duration() >= total),
        }
    }

    #[test]
    fn rb_cost_is_geometric_sum(r in 1u32..300, bler in 0.0f64..0.999, x in 1u32..12) {
        let direct: f64 = (0..x).map(|k| f64::from(r) * bler.powi(k as i32)).sum();
        let v = expected_rb_cost(r, bler, x);
        prop_assert!((v - direct).abs() <= 1e-12 * direct);
    }
}

fn cost_matrix(m: usize, n: usize, max: u32, holes: bool) -> impl Strategy<Value = CostMatrix> {
    let cell = if holes {
        prop_oneof![4 => (0..=max).prop_map(|c| Some(f64::from(c))), 1 => Just(None)].boxed()
    } else {
        (0..=max).prop_map(|c| Some(f64::from(c))).boxed()
    };
    proptest::collection::vec(proptest::collection::vec(cell, n), m).prop_map(|rows| CostMatrix::new(rows).unwrap())
}

fn sized_matrix(holes: bool) -> impl Strategy<Value = CostMatrix> {
    (1usize..=4).prop_flat_map(move |m| (m..=7).prop_flat_map(move |n| cost_matrix(m, n, 30, holes)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn auction_matches_oracle(costs in sized_matrix(true)) {
        let cfg = AuctionConfig { scale: 1.0, epsilon_denominator: None };
        match (solve_assignment(&costs, &cfg), brute_force_assignment(&costs, 1.0)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.scaled_objective, b.scaled_objective);
                let loads = a.loads(costs.aps());
                prop_assert!(loads.iter().all(|&l| l >= 1));
                prop_assert_eq!(a.user_to_ap.len(), costs.users());
                prop_assert!(a.user_to_ap.iter().enumerate().all(|(n, &m)| costs.get(m, n).is_some()));
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "solver {:?} vs oracle {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn auction_output_is_certified(costs in sized_matrix(true)) {
        let int = integerize_costs(&costs, 1.0).unwrap();
        if let Ok((state, int)) = run_auction(int, &AuctionConfig { scale: 1.0, epsilon_denominator: None }) {
            prop_assert_eq!(verify_eps_cs(&state, &int), Ok(()));
        }
    }

    #[test]
    fn forward_prices_never_fall(costs in sized_matrix(false)) {
        let int = integerize_costs(&costs, 1.0).unwrap();
        let mut s = AuctionState::new(&int, 2 * costs.aps() as i64);
        let mut prev = s.user_prices.clone();
        while !s.unassigned_aps().is_empty() {
            forward_round(&mut s, &int);
            prop_assert!(s.user_prices.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = s.user_prices.clone();
        }
    }

    #[test]
    fn fractional_costs_within_rounding_bound(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..20.0, 5), 2)) {
        let costs = CostMatrix::from_finite(&rows).unwrap();
        let a = solve_assignment(&costs, &AuctionConfig::default()).unwrap();
        let best = brute_force_assignment(&costs, 1e9).unwrap();
        prop_assert!((a.objective - best.objective).abs() <= a.rounding_bound());
    }

    #[test]
    fn table_round_trip(values in proptest::collection::vec(prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Cell::Num), "[a-z_]{1,8}".prop_map(Cell::Text), Just(Cell::Missing)], 1..30)) {
        let mut t = Table::new("t", vec![Column::new("a", "1"), Column::new("b", "Hz"), Column::new("c", "s")]);
        for chunk in values.chunks(3).filter(|c| c.len() == 3) {
            t.push(chunk.to_vec());
        }
        prop_assume!(!t.rows.is_empty());
        let csv = Table::from_csv("t", &t.to_csv().unwrap()).unwrap();
        prop_assert_eq!(&csv, &t);
        prop_assert_eq!(Table::from_json(&t.to_json().unwrap()).unwrap(), t);
    }
}

fn random_context() -> impl Strategy<Value = PairContext> {
    (1e6f64..2e7, 4e-3f64..16e-3, log_uniform(1e-6, 1e-2), 0.0f64..30.0).prop_map(|(rate, d, eps, db)| {
        PairContext::new(
            ChannelModel::from_db(db).unwrap(),
            QosRequirement {
                arrival_rate: rate,
                total_delay_budget: d,
                lvp_threshold: eps,
                decode_bler_threshold: 1e-3,
            },
            SystemParams::default(),
            table(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn early_break_is_sound(mut ctx in random_context()) {
        let fast = solve_pair(&ctx).unwrap();
        ctx.early_break = false;
        prop_assert_eq!(fast, solve_pair(&ctx).unwrap());
    }

    #[test]
    fn solutions_certify(ctx in random_context()) {
        if let Some(s) = solve_pair(&ctx).unwrap() {
            prop_assert_eq!(certify(&s, &ctx).unwrap(), vec![]);
            prop_assert!(s.expected_cost <= f64::from(ctx.params.total_rbs));
            let est = lvp_estimate(s.latency_exponent, ctx.qos.arrival_rate, s.queue_budget, s.mean_service_bits, &ctx.params);
            prop_assert!((est - ctx.qos.lvp_threshold).abs() <= 1e-9 * ctx.qos.lvp_threshold);
        }
    }

    #[test]
    fn bisection_step_bound(ctx in random_context(), r in 1u32..60, x in 1u32..4) {
        let bound = ((ctx.rho_max - ctx.rho_min) / ctx.bisection_tolerance).log2().ceil() as u32;
        let mut lo = ctx.rho_min;
        let mut hi = ctx.rho_max;
        let mut first = true;
        let lambda = ctx.qos.arrival_rate;
        let found = solve_ber_threshold_traced(r, x, &ctx, |p| {
            if first {
                first = false;
                return;
            }
            // Every probe lies strictly inside the current bracket.
            assert!(lo < p.rho && p.rho < hi);
            if p.capacity < lambda { lo = p.rho } else { hi = p.rho }
        }).unwrap();
        if let Some(f) = found {
            prop_assert!(f.steps <= bound);
            prop_assert!(f.probe.capacity >= lambda);
            prop_assert_eq!(f.rho, hi);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn queue_conserves_bits_and_respects_deadlines(
        r in 1u32..30,
        rho in log_uniform(1e-7, 0.1),
        x in 1u32..4,
        db in 0.0f64..25.0,
        rate in 1e6f64..2e7,
        dq in 5e-4f64..1e-2,
        seed in any::<u64>(),
        conditioned in any::<bool>(),
    ) {
        let sol = TpdSolution {
            rb_count: r,
            ber_threshold: rho,
            transmissions: x,
            latency_exponent: 1e-5,
            queue_budget: dq,
            expected_cost: f64::from(r),
            mean_bler: 0.0,
            mean_service_bits: 0.0,
            effective_capacity: 0.0,
        };
        let qos = QosRequirement { arrival_rate: rate, total_delay_budget: 2e-2, lvp_threshold: 1e-3, decode_bler_threshold: 1e-3 };
        let p = SystemParams::default();
        let cfg = SimConfig { n_slots: 3000, seed, conditioned_draws: conditioned, record_trace: true, ..SimConfig::default() };
        let ch = ChannelModel::from_db(db).unwrap();
        let st = run_queue_sim(&sol, &qos, &ch, &p, &table(), &cfg).unwrap();
        prop_assert!(st.conserves_bits());
        let max_age = (dq / p.slot_duration * (1.0 + 1e-12)).floor() as u64;
        prop_assert!(st.max_served_age_slots <= max_age);
        if let Some(a) = st.min_dropped_age_slots {
            prop_assert!(a > max_age);
        }
        prop_assert!(st.trace.iter().all(|s| s.initial_rbs <= p.total_rbs));
        let again = run_queue_sim(&sol, &qos, &ch, &p, &table(), &cfg).unwrap();
        prop_assert_eq!(st, again);
    }
}

#[test]
fn deep_fade_is_infeasible() {
    let ctx = PairContext::new(
        ChannelModel::new(1e-6).unwrap(),
        QosRequirement {
            arrival_rate: 5e7,
            total_delay_budget: 10e-3,
            lvp_threshold: 1e-3,
            decode_bler_threshold: 1e-3,
        },
        SystemParams::default(),
        table(),
    )
    .unwrap();
    assert!(solve_pair(&ctx).unwrap().is_none());
}

#[test]
fn slack_qos_reduces_to_rate_floor() {
    let p = SystemParams::default();
    let ctx = PairContext::new(
        ChannelModel::from_db(60.0).unwrap(),
        QosRequirement {
            arrival_rate: 1e7,
            total_delay_budget: 1.0,
            lvp_threshold: 0.5,
            decode_bler_threshold: 0.5,
        },
        p,
        table(),
    )
    .unwrap();
    let s = solve_pair(&ctx).unwrap().unwrap();
    assert_eq!(s.transmissions, 1);
    // At 60 dB every draw uses the top mode.
    let per_rb = p.bits_per_rb(table().efficiency(table().top()));
    let floor = (p.bits_per_slot(1e7) / per_rb).floor() as u32 + 1;
    assert_eq!(s.rb_count, floor);
}
