use std::path::PathBuf;

use lanesel::codec::{decode_beacon, encode_beacon, Beacon, BEACON_LEN};
use lanesel::config::{DensityLevel, ScenarioConfig, SystemMode};
use lanesel::experiments::{run_experiment, write_plot_data, ExperimentId, ExperimentSpec, RUNS_CSV_HEADER, SUMMARY_CSV_HEADER};
use lanesel::metrics::RUN_CSV_HEADER;
use lanesel::sim::run_scenario;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

fn parse_hex(text: &str) -> Vec<u8> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split_whitespace())
        .map(|b| u8::from_str_radix(b, 16).unwrap())
        .collect()
}

#[test]
fn zero_beacon_matches_golden_hex() {
    let want = parse_hex(&read("zero_beacon.hex"));
    assert_eq!(want.len(), BEACON_LEN);
    let got = encode_beacon(&Beacon::default()).unwrap();
    assert_eq!(got.as_slice(), want.as_slice());
    assert_eq!(decode_beacon(&want).unwrap(), Beacon::default());
}

#[test]
fn sample_scenario_parses() {
    let cfg = ScenarioConfig::from_toml_str(&read("scenario.toml")).unwrap();
    assert_eq!(cfg.density, DensityLevel::High);
    assert_eq!(cfg.vehicle_count(), 150);
    assert_eq!(cfg.mode, SystemMode::Proposed);
    assert_eq!(cfg.channel.tx_range_m, 500.0);
    assert_eq!(cfg.seed, 7);
}

#[test]
fn out_of_table_range_is_rejected() {
    let err = ScenarioConfig::from_toml_str(&read("bad_range.toml")).unwrap_err();
    assert_eq!(err.field(), Some("channel.tx_range_m"));
}

#[test]
fn run_csv_header_is_pinned() {
    let cfg = ScenarioConfig { duration_s: 5.0, vehicle_count: Some(4), ..ScenarioConfig::default() };
    let csv = run_scenario(&cfg).unwrap().to_csv_string();
    let header = read("run_csv_header.csv");
    assert_eq!(csv.lines().next().unwrap(), header.trim_end());
    assert_eq!(RUN_CSV_HEADER.join(","), header.trim_end());
}

#[test]
fn experiment_csv_headers_are_pinned() {
    let base = ScenarioConfig { duration_s: 60.0, max_vehicles: 20, ..ScenarioConfig::default() };
    let spec = ExperimentSpec::new(ExperimentId::CongestionEffect, base, vec![1, 2]);
    let result = run_experiment(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    result.write_artifacts(dir.path()).unwrap();
    let runs = std::fs::read_to_string(dir.path().join("congestion_effect_runs.csv")).unwrap();
    let summary = std::fs::read_to_string(dir.path().join("congestion_effect_summary.csv")).unwrap();
    assert_eq!(runs.lines().next().unwrap(), read("runs_csv_header.csv").trim_end());
    assert_eq!(summary.lines().next().unwrap(), read("summary_csv_header.csv").trim_end());
    assert_eq!(RUNS_CSV_HEADER.join(","), read("runs_csv_header.csv").trim_end());
    assert_eq!(SUMMARY_CSV_HEADER.join(","), read("summary_csv_header.csv").trim_end());
    // 3 cells x 2 seeds, each with a treatment and an off row
    assert_eq!(runs.lines().count(), 1 + 3 * 2 * 2);
    assert_eq!(summary.lines().count(), 1 + 3);

    let mut plot = Vec::new();
    write_plot_data(&result.rows(), &mut plot).unwrap();
    let plot = String::from_utf8(plot).unwrap();
    assert_eq!(plot.lines().next().unwrap(), read("plot_csv_header.csv").trim_end());
}
