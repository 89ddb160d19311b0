use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cran-xlayer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_SCENARIO: &str = "[scenario]\naps = 2\nusers = 4\narea_m = 150.0\n";

#[test]
fn solve_pair_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["solve-pair", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("pair.csv")).unwrap();
    assert!(csv.starts_with("rb_count [RB],ber_threshold [1],transmissions [1]"));
    assert!(out.join("pair.json").exists());
}

#[test]
fn infeasible_pair_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[pair]\nmean_snr_db = 0.0\n[pair.qos]\narrival_rate = 1e9\ntotal_delay_budget = 3e-3\nlvp_threshold = 1e-6\ndecode_bler_threshold = 1e-3\n",
    );
    let o = run(&[
        "solve-pair",
        "--config",
        &cfg,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "unknown_key = 3\n");
    let o = run(&["solve-pair", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.toml"));
    let o = run(&["plan", "--config", "/does/not/exist.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn plan_is_reproducible_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SCENARIO);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "plan",
            "--config",
            &cfg,
            "--seed",
            "5",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["plan.json", "assignment.csv", "summary.csv", "ap_load.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let o = run(&["verify", "--config", &cfg, "--out-dir", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    // Tamper with a dual price; the certificate must fail.
    let text = fs::read_to_string(a.join("plan.json")).unwrap();
    let key = "\"user_prices\": [";
    let at = text.find(key).unwrap() + key.len();
    let tampered = format!("{}\n      1e6,{}", &text[..at], text[at..].split_once(',').unwrap().1);
    fs::write(a.join("bad.json"), tampered).unwrap();
    let bad = a.join("bad.json");
    let o = run(&["verify", "--config", &cfg, "--plan", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_emits_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[sweep]\naxis = \"total_delay\"\nvalues = [0.004, 0.006, 0.008]\nmean_snr_db = 15.0\nfixed = []\nifc = false\n[sweep.qos]\narrival_rate = 2e7\ntotal_delay_budget = 0.01\nlvp_threshold = 1e-5\ndecode_bler_threshold = 1e-3\n",
    );
    let out = dir.path().join("out");
    let o = run(&["sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let plot = fs::read_to_string(out.join("sweep_plot.csv")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("total_delay [s],bandwidth [Hz],transmissions [1]"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn simulate_reports_against_analytics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[simulation]\nn_slots = 20000\nn_blocks = 20000\nrecord_trace = true\n",
    );
    let out = dir.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "3",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 20001);
    let sim = fs::read_to_string(out.join("simulation.csv")).unwrap();
    assert!(sim.contains("rbs_per_slot"));
}
