use std::path::PathBuf;
use std::process::Command;

fn lanesel() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanesel"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn validate_config_exit_codes() {
    let ok = lanesel().arg("validate-config").arg(fixture("scenario.toml")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = lanesel().arg("validate-config").arg(fixture("bad_range.toml")).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("channel.tx_range_m"));
    let missing = lanesel().args(["validate-config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(lanesel().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(lanesel().args(["run", "--density", "extreme"]).output().unwrap().status.code(), Some(1));
    assert_eq!(lanesel().args(["run", "--oda-budget", "51"]).output().unwrap().status.code(), Some(1));
    assert_eq!(lanesel().args(["experiment", "congestion_effect", "--seeds", "1"]).output().unwrap().status.code(), Some(1));
    assert_eq!(lanesel().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn run_writes_a_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--density", "low", "--mode", "st-baseline", "--seed", "4", "--tx-range", "500"];
    let out = lanesel().args(args).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let file = std::fs::read_to_string(dir.path().join("run_st_baseline_4.csv")).unwrap();
    let stdout = lanesel().args(args).output().unwrap().stdout;
    assert_eq!(file.as_bytes(), stdout.as_slice());
    assert!(file.lines().last().unwrap().starts_with("summary,"));
}

#[test]
fn experiment_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, "duration_s = 60.0\nmax_vehicles = 20\n").unwrap();
    let out = lanesel()
        .args(["experiment", "oda-impact", "--seeds", "2", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("budget_0") && table.contains("budget_50"));

    let runs = dir.path().join("oda_impact_runs.csv");
    let plot = dir.path().join("plot.csv");
    let out = lanesel().arg("plot-data").arg(&runs).arg("--output").arg(&plot).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(plot).unwrap();
    assert!(text.starts_with("experiment_id,cell,seed,mode,metric,value\n"));
    assert!(text.contains("oda_impact,budget_10,1,proposed,odas_issued,"));

    let bad = lanesel().arg("plot-data").arg(&cfg).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
