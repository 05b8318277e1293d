use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scd_core::cli::RunRecord;

fn scd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scd")).args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn summary_field(o: &Output, column: &str) -> f64 {
    let text = stdout(o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    row[idx].parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn counter_on_tcp_instance() {
    let o = scd(&["--dt", "0.001", "run", "--algo", "counter", "--instance", &data("tcp.json")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!((summary_field(&o, "total") - 2.0).abs() <= 1e-2);
}

#[test]
fn onf_on_lower_bound_depth_two() {
    let o = scd(&["run", "--algo", "onf", "--gen", "lower-bound", "--depth", "2"]);
    assert!(o.status.success());
    let c1 = 13.0 / 12.0;
    assert!(summary_field(&o, "ratio") >= c1 + 1.0 / (12.0 * c1));
}

#[test]
fn oversized_opt_is_a_guard_error() {
    let o = scd(&["run", "--algo", "opt", "--gen", "random", "--requests", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size guard"));
}

#[test]
fn bad_input_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"sets": [{"cost": "0.5", "elements": [0]}], "requests": [], "horizon": "1"}"#).unwrap();
    let o = scd(&["run", "--algo", "onf", "--instance", p(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sets[0]"));
    assert_eq!(scd(&["run", "--algo", "warp"]).status.code(), Some(3));
}

#[test]
fn verify_passes_then_fails_after_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.json");
    let o = scd(&[
        "--dt", "0.001", "--out", p(&rec), "run", "--algo", "onf", "--gen", "hub", "--k", "8", "--record-certificate",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = scd(&["verify", p(&rec)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("PASS dual-feasibility"));

    let mut record: RunRecord = serde_json::from_str(&std::fs::read_to_string(&rec).unwrap()).unwrap();
    record.trace.cost_buy *= 10.0;
    let corrupt = dir.path().join("corrupt.json");
    std::fs::write(&corrupt, serde_json::to_string(&record).unwrap()).unwrap();
    let v = scd(&["verify", p(&corrupt)]);
    assert_eq!(v.status.code(), Some(1));
    assert!(stdout(&v).contains("FAIL buying-vs-delay"));

    let mut record: RunRecord = serde_json::from_str(&std::fs::read_to_string(&rec).unwrap()).unwrap();
    record.instance.horizon.0 += 1.0;
    std::fs::write(&corrupt, serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(scd(&["verify", p(&corrupt)]).status.code(), Some(1));
}

#[test]
fn verify_without_samples_is_missing_data() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.json");
    assert!(scd(&["--out", p(&rec), "run", "--algo", "onf", "--instance", &data("tcp.json")]).status.success());
    assert_eq!(scd(&["verify", p(&rec)]).status.code(), Some(3));
}

#[test]
fn verify_counter_and_opt_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.json");
    let o = scd(&[
        "--dt", "0.001", "--out", p(&rec), "run", "--algo", "counter", "--instance", &data("two_sets.json"), "--with-opt",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = scd(&["verify", p(&rec)]);
    assert_eq!(v.status.code(), Some(0), "{}", stdout(&v));
    assert!(stdout(&v).contains("PASS competitive-bound"));
}

#[test]
fn replay_reproduces_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let o = scd(&[
        "--seed", "4", "--out", p(&first), "run", "--algo", "onr-element", "--gen", "random", "--trials", "5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(scd(&["--out", p(&second), "run", "--replay", p(&first)]).status.success());
    let a = RunRecord::load(&first).unwrap();
    let b = RunRecord::load(&second).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.trials.len(), 5);
    assert_eq!(a.revision, "scd-1");
    assert_eq!(a.instance_digest, a.trace.instance_digest);
}

#[test]
fn bench_depth_sweep_and_empty_sweep() {
    let o = scd(&["bench", "--kind", "depth", "--max-depth", "3", "--algos", "onf"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut ratios = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.contains(",mean,")) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[12], "ok");
        ratios.push(cols[9].parse::<f64>().unwrap());
    }
    let c = scd_core::adversary::lower_bound_constants(3);
    assert_eq!(ratios.len(), 4);
    for (d, r) in ratios.iter().enumerate() {
        assert!(*r >= c[d].ratio * (1.0 - 1e-2));
    }
    assert!(ratios.windows(2).all(|w| w[1] >= w[0]));

    let empty = scd(&["bench", "--kind", "random", "--count", "0"]);
    assert_eq!(
        stdout(&empty),
        "kind,instance,algo,seed,dt,cost_buy,cost_delay,total,opt,ratio,ratio_ci_low,ratio_ci_high,status\n"
    );
}

#[test]
fn bench_records_guard_rows_and_continues() {
    let o = scd(&["bench", "--kind", "random", "--count", "2", "--requests", "20", "--algos", "onf"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.contains("guard:")));
}

#[test]
fn gen_and_export_lp() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("lb.json");
    let o = scd(&["--out", p(&inst), "gen", "lower-bound", "--depth", "1", "--against", "idle"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Cheap"));
    let loaded = scd_core::model::load_instance(&inst).unwrap();
    assert_eq!(loaded.requests.len(), 3);

    let lp = scd(&["--dt", "0.5", "export-lp", "--instance", p(&inst)]);
    assert!(lp.status.success());
    let text = stdout(&lp);
    assert!(text.lines().any(|l| l == "Minimize"));
    assert!(text.trim_end().ends_with("End"));
    let dual = scd(&["--dt", "0.5", "export-lp", "--instance", p(&inst), "--dual"]);
    assert!(stdout(&dual).lines().any(|l| l == "Maximize"));

    let unweighted = dir.path().join("unit.json");
    assert!(scd(&["--out", p(&unweighted), "gen", "unweighted", "--from", p(&inst)]).status.success());
    let conv = scd_core::model::load_instance(&unweighted).unwrap();
    assert!(conv.system.sets().iter().all(|s| s.cost == 1.0));
}

#[test]
fn dump_steps_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let steps = dir.path().join("steps.csv");
    let o = scd(&["--dt", "0.5", "run", "--algo", "onf", "--instance", &data("tcp.json"), "--dump-steps", p(&steps)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&steps).unwrap();
    assert!(text.starts_with("time,dt,pending,rate_sum,bought_now,min_pending_coverage"));
    assert_eq!(text.lines().count(), 1 + 9);
}
