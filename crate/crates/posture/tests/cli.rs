use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn posture(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posture"))
        .args(args)
        .env("POSTURE_LOG", "off")
        .output()
        .expect("binary runs")
}

fn run_bundled(out: &Path, extra: &[&str]) -> Output {
    let case = data("synthetic30.json");
    let schedule = data("synthetic30_schedule.json");
    let mut args = vec![
        "run",
        "--case",
        case.to_str().unwrap(),
        "--schedule",
        schedule.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    posture(&args)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn run_writes_reports_and_flags_infeasible_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_bundled(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("infeasible"), "{table}");

    let csv = read(dir.path(), "cascade.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("batch,lost_buses,lost_branches,lost_generators,status,operation_cost,shed_load_mw,rank1_residual,gap_percent")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[2].starts_with("3,0,3,1,infeasible,--,"), "{}", rows[2]);
    for k in 1..=6 {
        assert!(dir.path().join(format!("flows_{k}.csv")).exists());
    }
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "report.json")).unwrap();
    assert_eq!(report["steps"].as_array().unwrap().len(), 6);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "run");
}

#[test]
fn identical_runs_give_identical_tables() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_bundled(a.path(), &["--stop-on-infeasible"]);
    run_bundled(b.path(), &["--stop-on-infeasible"]);
    assert_eq!(read(a.path(), "cascade.csv"), read(b.path(), "cascade.csv"));
    assert_eq!(read(a.path(), "flows_1.csv"), read(b.path(), "flows_1.csv"));
    assert_eq!(read(a.path(), "cascade.csv").lines().count(), 1 + 3);
}

#[test]
fn without_derating_pre_and_post_flows_agree() {
    let dir = tempfile::tempdir().unwrap();
    run_bundled(dir.path(), &["--derate", "1.0", "--stop-on-infeasible"]);
    let flows = read(dir.path(), "flows_1.csv");
    for line in flows.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[1], cols[2], "{line}");
        assert_eq!(cols[3], cols[4], "{line}");
    }
}

#[test]
fn sweep_reports_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let case = data("synthetic30.json");
    let schedule = data("synthetic30_schedule.json");
    let out = posture(&[
        "sweep",
        "--case",
        case.to_str().unwrap(),
        "--schedule",
        schedule.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--step",
        "4",
        "--fractions",
        "1.0,0.5,0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("frontier: 0.5"), "{stdout}");
    let csv = read(dir.path(), "sweep.csv");
    assert!(csv.starts_with("fraction,status,operation_cost,frontier\n"), "{csv}");
    assert_eq!(csv.lines().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn validate_reports_findings() {
    let case = data("synthetic30.json");
    let ok = posture(&["validate", "--case", case.to_str().unwrap(), "--schedule", data("synthetic30_schedule.json").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("PASS"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"name": "bad", "batches": [{"branches": [999]}]}"#).unwrap();
    let out = posture(&["validate", "--case", case.to_str().unwrap(), "--schedule", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("FAIL") && stdout.contains("999"), "{stdout}");
}

#[test]
fn missing_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = posture(&[
        "run",
        "--case",
        dir.path().join("absent.json").to_str().unwrap(),
        "--schedule",
        data("synthetic30_schedule.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
