//! `cran-xlayer` command-line front end.
//!
//! Exit codes: 0 on success, 2 when the scenario or link is infeasible,
//! 1 on any other error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cran_xlayer::config::Config;
use cran_xlayer::plan::{assignment_table, load_table, plan_network, summary_table, verify_plan, Plan};
use cran_xlayer::report::{self, emit_results, Cell, Column, Format, Table};
use cran_xlayer::scenario::generate_scenario;
use cran_xlayer::sim::{run_block_sim, run_queue_sim, write_trace};
use cran_xlayer::sweep::{run_sweep, sweep_table, SweepAxis, SweepSpec, CROSS_LAYER};
use cran_xlayer::tpd::{certify, solve_pair, PairContext, TpdSolution};
use cran_xlayer::{ChannelModel, Error};

#[derive(Parser, Debug)]
#[command(
    name = "cran-xlayer",
    version,
    about = "Cross-layer C-RAN link sizing and user association"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Size the single link described by `[pair]`.
    SolvePair,
    /// Run the `[sweep]` section (a mean-SNR sweep if absent).
    Sweep,
    /// Generate the `[scenario]` network, size all pairs and associate users.
    Plan,
    /// Size `[pair]`, then simulate it slot by slot.
    Simulate,
    /// Re-verify a plan written by `plan`.
    Verify {
        /// Plan file; defaults to `<out-dir>/plan.json`.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

enum Outcome {
    Done,
    Infeasible(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible(why)) => {
            eprintln!("infeasible: {why}");
            ExitCode::from(2)
        }
        Err(Error::Infeasible(why)) => {
            eprintln!("infeasible: {why}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &Common) -> cran_xlayer::Result<Config> {
    let cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: &Cli) -> cran_xlayer::Result<Outcome> {
    let cfg = load_config(&cli.common)?;
    let out = cli.common.out_dir.as_path();
    match &cli.command {
        Command::SolvePair => solve_pair_cmd(&cfg, out),
        Command::Sweep => sweep_cmd(&cfg, out),
        Command::Plan => plan_cmd(&cfg, out),
        Command::Simulate => simulate_cmd(&cfg, out),
        Command::Verify { plan } => {
            let path = plan.clone().unwrap_or_else(|| out.join("plan.json"));
            verify_cmd(&cfg, &path)
        }
    }
}

fn pair_context(cfg: &Config) -> cran_xlayer::Result<PairContext> {
    cfg.solver.context(
        ChannelModel::from_db(cfg.pair.mean_snr_db)?,
        cfg.pair.qos,
        cfg.system,
        cfg.table()?,
    )
}

fn solution_table(name: &str, s: &TpdSolution, hertz_per_rb: f64) -> Table {
    let mut t = Table::new(
        name,
        vec![
            Column::new("rb_count", "RB"),
            Column::new("ber_threshold", "1"),
            Column::new("transmissions", "1"),
            Column::new("latency_exponent", "1/bit"),
            Column::new("queue_budget", "s"),
            Column::new("rb_cost", "RB/slot"),
            Column::new("bandwidth", "Hz"),
            Column::new("mean_bler", "1"),
            Column::new("mean_service", "bit/slot"),
            Column::new("effective_capacity", "bit/s"),
        ],
    );
    t.push(vec![
        s.rb_count.into(),
        s.ber_threshold.into(),
        s.transmissions.into(),
        s.latency_exponent.into(),
        s.queue_budget.into(),
        s.expected_cost.into(),
        (s.expected_cost * hertz_per_rb).into(),
        s.mean_bler.into(),
        s.mean_service_bits.into(),
        s.effective_capacity.into(),
    ]);
    t
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn solve_pair_cmd(cfg: &Config, out: &Path) -> cran_xlayer::Result<Outcome> {
    let ctx = pair_context(cfg)?;
    let Some(sol) = solve_pair(&ctx)? else {
        return Ok(Outcome::Infeasible("no (r, rho, X) meets the pair's QoS".into()));
    };
    let violations = certify(&sol, &ctx)?;
    if !violations.is_empty() {
        return Err(Error::Domain(format!("solution failed certification: {violations:?}")));
    }
    let t = solution_table("pair", &sol, cfg.system.hertz_per_rb());
    report_written(&emit_results(&[t], out, Format::Both)?);
    println!(
        "r = {} RB, rho = {:e}, X = {}, cost = {} RB/slot",
        sol.rb_count, sol.ber_threshold, sol.transmissions, sol.expected_cost
    );
    Ok(Outcome::Done)
}

fn sweep_cmd(cfg: &Config, out: &Path) -> cran_xlayer::Result<Outcome> {
    let spec = cfg.sweep.clone().unwrap_or_else(|| {
        SweepSpec::new(
            SweepAxis::MeanSnr,
            vec![5.0, 10.0, 15.0, 20.0, 25.0],
            cfg.pair.qos,
            cfg.pair.mean_snr_db,
        )
    });
    let rows = run_sweep(&spec, &cfg.system, &cfg.table()?, &cfg.solver)?;
    let tidy = sweep_table("sweep", spec.axis, &rows);
    let plot = tidy
        .filter_text("strategy", CROSS_LAYER)
        .select("sweep_plot", &[&spec.axis.column().name, "bandwidth", "transmissions"])?;
    report_written(&emit_results(&[tidy, plot], out, Format::Both)?);
    Ok(Outcome::Done)
}

fn plan_cmd(cfg: &Config, out: &Path) -> cran_xlayer::Result<Outcome> {
    let scenario = generate_scenario(&cfg.scenario, cfg.system, cfg.table()?)?;
    let plan = plan_network(&scenario, &cfg.solver, &cfg.auction)?;
    let mut written = vec![report::write_file(&out.join("plan.json"), &report::to_json(&plan)?)?];
    written.extend(emit_results(
        &[assignment_table(&plan), summary_table(&plan), load_table(&plan)],
        out,
        Format::Both,
    )?);
    report_written(&written);
    println!(
        "auction total {} RB/slot ({} Hz)",
        plan.auction.total_cost, plan.auction.total_bandwidth
    );
    if let Some(bc) = &plan.best_channel {
        println!("best-channel total {} RB/slot", bc.total_cost);
    }
    Ok(Outcome::Done)
}

fn simulate_cmd(cfg: &Config, out: &Path) -> cran_xlayer::Result<Outcome> {
    let ctx = pair_context(cfg)?;
    let Some(sol) = solve_pair(&ctx)? else {
        return Ok(Outcome::Infeasible("no (r, rho, X) meets the pair's QoS".into()));
    };
    let sim = &cfg.simulation;
    let q = run_queue_sim(&sol, &ctx.qos, &ctx.channel, &ctx.params, &ctx.table, sim)?;
    let b = run_block_sim(&sol, &ctx.channel, &ctx.params, &ctx.table, sim)?;
    let mut t = Table::new(
        "simulation",
        vec![
            Column::new("quantity", "1"),
            Column::new("simulated", "1"),
            Column::new("std_error", "1"),
            Column::new("analytic", "1"),
        ],
    );
    let lvp_target = ctx.qos.lvp_threshold;
    let mut row = |name: &str, sim: f64, se: Cell, analytic: Cell| t.push(vec![name.into(), sim.into(), se, analytic]);
    row("lvp", q.empirical_lvp, Cell::Missing, lvp_target.into());
    row(
        "rbs_per_slot",
        q.rbs_per_slot.mean,
        q.rbs_per_slot.std_error.into(),
        sol.expected_cost.into(),
    );
    row(
        "bler_per_transmission",
        b.per_transmission.estimate,
        b.per_transmission.std_error.into(),
        sol.mean_bler.into(),
    );
    row(
        "residual_bler",
        b.residual.estimate,
        b.residual.std_error.into(),
        sol.mean_bler.powi(sol.transmissions as i32).into(),
    );
    row(
        "residual_loss_ratio",
        q.residual_lost_bits as f64 / q.arrived_bits.max(1) as f64,
        Cell::Missing,
        Cell::Missing,
    );
    row("mean_backlog_bits", q.mean_backlog_bits, Cell::Missing, Cell::Missing);
    row(
        "bandwidth_hz",
        q.bandwidth_hz,
        Cell::Missing,
        (sol.expected_cost * ctx.params.hertz_per_rb()).into(),
    );
    let mut written = emit_results(
        &[t, solution_table("pair", &sol, ctx.params.hertz_per_rb())],
        out,
        Format::Both,
    )?;
    if sim.record_trace {
        let path = out.join("trace.csv");
        let file = std::fs::File::create(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        write_trace(&q.trace, std::io::BufWriter::new(file))?;
        written.push(path);
    }
    report_written(&written);
    if !q.conserves_bits() {
        return Err(Error::Domain("bit conservation failed".into()));
    }
    Ok(Outcome::Done)
}

fn verify_cmd(cfg: &Config, path: &Path) -> cran_xlayer::Result<Outcome> {
    let plan: Plan = report::read_json(path)?;
    let issues = verify_plan(&plan, &cfg.solver)?;
    if issues.is_empty() {
        println!(
            "{}: {} users, {} APs, all pair constraints and the assignment certificate hold",
            path.display(),
            plan.scenario.users.len(),
            plan.scenario.aps.len()
        );
        Ok(Outcome::Done)
    } else {
        for i in &issues {
            println!("{i:?}");
        }
        Err(Error::Domain(format!("{} verification issue(s)", issues.len())))
    }
}
