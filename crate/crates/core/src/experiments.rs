//! Experiment harness: sweeps over densities, modes and ODA budgets, each
//! treatment run paired with an Off run of the same seed.
//!
//! Per-run CSV columns:
//!
//! ```text
//! experiment_id,cell,seed,mode,mean_travel_time_s,delta_pct,odas_issued,lane_changes,aborts,beacon_delivery_ratio
//! ```
//!
//! Each cell contributes one treatment row and one `off` row per seed; the
//! `off` row leaves `delta_pct` empty.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::config::{DensityLevel, ScenarioConfig, SystemMode, MAX_ODA_BUDGET};
use crate::metrics::RunMetrics;
use crate::sim::run_scenario;

pub const RUNS_CSV_HEADER: [&str; 10] = [
    "experiment_id",
    "cell",
    "seed",
    "mode",
    "mean_travel_time_s",
    "delta_pct",
    "odas_issued",
    "lane_changes",
    "aborts",
    "beacon_delivery_ratio",
];

pub const SUMMARY_CSV_HEADER: [&str; 10] = [
    "experiment_id",
    "cell",
    "mode",
    "n",
    "mean_delta_pct",
    "min_delta_pct",
    "max_delta_pct",
    "se_delta_pct",
    "mean_travel_time_s",
    "baseline_mean_travel_time_s",
];

pub const DEFAULT_SEEDS: u64 = 30;
pub const ODA_BUDGET_GRID: [u8; 6] = [0, 10, 20, 30, 40, 50];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("run failed in cell `{cell}` seed {seed}: {message}")]
    RunFailure { cell: String, seed: u64, message: String },
    #[error("nothing to aggregate")]
    EmptyInput,
    #[error("run for seed {0} has no travel-time delta")]
    MissingDelta(u64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    /// Travel-time delta of the configured mode across density levels.
    CongestionEffect,
    /// Proposed system and the spatiotemporal baseline across density levels.
    SystemEffect,
    /// Proposed system at medium density across per-vehicle ODA budgets.
    OdaImpact,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 3] = [ExperimentId::CongestionEffect, ExperimentId::SystemEffect, ExperimentId::OdaImpact];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::CongestionEffect => "congestion_effect",
            ExperimentId::SystemEffect => "system_effect",
            ExperimentId::OdaImpact => "oda_impact",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.as_str() == s.replace('-', "_"))
            .ok_or_else(|| format!("unknown experiment `{s}` (congestion_effect, system_effect, oda_impact)"))
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub label: String,
    pub density: DensityLevel,
    pub mode: SystemMode,
    pub oda_budget: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
    pub cells: Vec<Cell>,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId, base: ScenarioConfig, seeds: Vec<u64>) -> Self {
        let budget = base.oda_budget;
        let cells = match id {
            ExperimentId::CongestionEffect => {
                let mode = if base.mode == SystemMode::Off { SystemMode::Proposed } else { base.mode };
                DensityLevel::ALL
                    .into_iter()
                    .map(|density| Cell { label: density.to_string(), density, mode, oda_budget: budget })
                    .collect()
            }
            ExperimentId::SystemEffect => DensityLevel::ALL
                .into_iter()
                .flat_map(|density| {
                    [SystemMode::Proposed, SystemMode::StBaseline].map(|mode| Cell {
                        label: format!("{density}/{mode}"),
                        density,
                        mode,
                        oda_budget: budget,
                    })
                })
                .collect(),
            ExperimentId::OdaImpact => ODA_BUDGET_GRID
                .into_iter()
                .map(|b| Cell {
                    label: format!("budget_{b}"),
                    density: DensityLevel::Medium,
                    mode: SystemMode::Proposed,
                    oda_budget: b,
                })
                .collect(),
        };
        Self { id, seeds, base, cells }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.len() < 2 {
            return Err(ExperimentError::InvalidSpec("at least two seeds are needed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(ExperimentError::InvalidSpec("seeds must be distinct".into()));
        }
        if self.cells.is_empty() {
            return Err(ExperimentError::InvalidSpec("no sweep cells".into()));
        }
        for c in &self.cells {
            if c.oda_budget > MAX_ODA_BUDGET {
                return Err(ExperimentError::InvalidSpec(format!("cell {}: budget {} over {MAX_ODA_BUDGET}", c.label, c.oda_budget)));
            }
        }
        self.base.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))
    }

    pub fn cell_config(&self, cell: &Cell, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            density: cell.density,
            mode: cell.mode,
            oda_budget: cell.oda_budget,
            seed,
            vehicle_count: None,
            ..self.base.clone()
        }
    }

    fn off_config(&self, density: DensityLevel, seed: u64) -> ScenarioConfig {
        ScenarioConfig { density, mode: SystemMode::Off, seed, vehicle_count: None, ..self.base.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub experiment_id: String,
    pub cell: String,
    pub seed: u64,
    pub mode: SystemMode,
    pub mean_travel_time_s: Option<f64>,
    pub delta_pct: Option<f64>,
    pub odas_issued: u64,
    pub lane_changes: u64,
    pub aborts: u64,
    pub beacon_delivery_ratio: f64,
}

impl ExperimentRow {
    fn from_run(id: ExperimentId, cell: &str, m: &RunMetrics) -> Self {
        Self {
            experiment_id: id.to_string(),
            cell: cell.to_string(),
            seed: m.seed,
            mode: m.mode,
            mean_travel_time_s: m.mean_travel_time_s,
            delta_pct: m.travel_time_delta_pct,
            odas_issued: m.odas_issued,
            lane_changes: m.lane_changes(),
            aborts: m.lane_change_aborts,
            beacon_delivery_ratio: m.beacon_delivery_ratio(),
        }
    }
}

/// Delta statistics of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Standard error of the mean (sample standard deviation over sqrt n).
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub delta: DeltaSummary,
    pub mean_travel_time_s: f64,
    pub baseline_mean_travel_time_s: f64,
}

/// A treatment run and its matched Off run.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedRun {
    pub treatment: RunMetrics,
    pub off: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub id: ExperimentId,
    /// Per cell, per seed in spec order.
    pub runs: Vec<(Cell, Vec<PairedRun>)>,
    pub summaries: Vec<CellSummary>,
}

pub fn summarize(deltas: &[f64]) -> Result<DeltaSummary, ExperimentError> {
    if deltas.is_empty() {
        return Err(ExperimentError::EmptyInput);
    }
    let n = deltas.len();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let min = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let max = deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let se = if n > 1 {
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    // Summation rounding can nudge a constant sample's mean off its value.
    Ok(DeltaSummary { n, mean: mean.clamp(min, max), min, max, se })
}

/// Delta statistics over runs that carry a matched-Off delta.
pub fn aggregate(runs: &[RunMetrics]) -> Result<DeltaSummary, ExperimentError> {
    let deltas = runs
        .iter()
        .map(|r| r.travel_time_delta_pct.ok_or(ExperimentError::MissingDelta(r.seed)))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(&deltas)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for treatment < control.
    pub p_less: f64,
    pub p_two_sided: f64,
}

/// Paired t-test on `treatment[i] - control[i]`.
pub fn paired_t_test(treatment: &[f64], control: &[f64]) -> Result<PairedTest, ExperimentError> {
    if treatment.len() != control.len() || treatment.len() < 2 {
        return Err(ExperimentError::InvalidSpec("paired test needs two equal samples of size >= 2".into()));
    }
    let diffs: Vec<f64> = treatment.iter().zip(control).map(|(t, c)| t - c).collect();
    let n = diffs.len();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        let (p_less, p_two) = match mean.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => (0.0, 0.0),
            Some(std::cmp::Ordering::Greater) => (1.0, 0.0),
            _ => (0.5, 1.0),
        };
        return Ok(PairedTest { n, mean_diff: mean, t: 0.0, p_less, p_two_sided: p_two });
    }
    let t = mean / se;
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
    let p_less = dist.cdf(t);
    let p_two_sided = 2.0 * dist.cdf(-t.abs());
    Ok(PairedTest { n, mean_diff: mean, t, p_less, p_two_sided })
}

/// Runs every cell and seed plus the matched Off runs, in parallel.
/// Off runs are shared between cells of the same density.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, ExperimentError> {
    spec.validate()?;
    let mut off_keys: Vec<(DensityLevel, u64)> =
        spec.cells.iter().flat_map(|c| spec.seeds.iter().map(move |&s| (c.density, s))).collect();
    off_keys.sort_unstable();
    off_keys.dedup();

    let off: BTreeMap<(DensityLevel, u64), RunMetrics> = off_keys
        .par_iter()
        .map(|&(density, seed)| {
            run_scenario(&spec.off_config(density, seed))
                .map(|m| ((density, seed), m))
                .map_err(|e| ExperimentError::RunFailure { cell: format!("{density}/off"), seed, message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, u64)> = (0..spec.cells.len()).flat_map(|c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let treated: Vec<RunMetrics> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &spec.cells[c];
            run_scenario(&spec.cell_config(cell, seed))
                .map(|m| m.with_delta(&off[&(cell.density, seed)]))
                .map_err(|e| ExperimentError::RunFailure { cell: cell.label.clone(), seed, message: e.to_string() })
        })
        .collect::<Result<_, _>>()?;

    let mut runs = Vec::with_capacity(spec.cells.len());
    let mut summaries = Vec::with_capacity(spec.cells.len());
    let mut treated = treated.into_iter();
    for cell in &spec.cells {
        let pairs: Vec<PairedRun> = spec
            .seeds
            .iter()
            .map(|&seed| PairedRun { treatment: treated.next().expect("one run per job"), off: off[&(cell.density, seed)].clone() })
            .collect();
        let treatments: Vec<RunMetrics> = pairs.iter().map(|p| p.treatment.clone()).collect();
        let delta = aggregate(&treatments)?;
        let mean_tt = |f: &dyn Fn(&PairedRun) -> Option<f64>| {
            let v: Vec<f64> = pairs.iter().filter_map(f).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        };
        summaries.push(CellSummary {
            cell: cell.clone(),
            delta,
            mean_travel_time_s: mean_tt(&|p| p.treatment.mean_travel_time_s),
            baseline_mean_travel_time_s: mean_tt(&|p| p.off.mean_travel_time_s),
        });
        runs.push((cell.clone(), pairs));
    }
    Ok(ExperimentResult { id: spec.id, runs, summaries })
}

impl ExperimentResult {
    pub fn rows(&self) -> Vec<ExperimentRow> {
        let mut rows = Vec::new();
        for (cell, pairs) in &self.runs {
            for p in pairs {
                rows.push(ExperimentRow::from_run(self.id, &cell.label, &p.treatment));
                rows.push(ExperimentRow::from_run(self.id, &cell.label, &p.off));
            }
        }
        rows
    }

    pub fn summary(&self, label: &str) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.cell.label == label)
    }

    /// Treatment and Off mean travel times of one cell, paired by seed.
    pub fn paired_travel_times(&self, label: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let (_, pairs) = self.runs.iter().find(|(c, _)| c.label == label)?;
        let both: Vec<(f64, f64)> = pairs
            .iter()
            .filter_map(|p| Some((p.treatment.mean_travel_time_s?, p.off.mean_travel_time_s?)))
            .collect();
        Some(both.into_iter().unzip())
    }

    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        write_rows(&self.rows(), out)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_CSV_HEADER)?;
        for s in &self.summaries {
            w.write_record([
                self.id.to_string(),
                s.cell.label.clone(),
                s.cell.mode.to_string(),
                s.delta.n.to_string(),
                s.delta.mean.to_string(),
                s.delta.min.to_string(),
                s.delta.max.to_string(),
                s.delta.se.to_string(),
                s.mean_travel_time_s.to_string(),
                s.baseline_mean_travel_time_s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<id>_runs.csv` and `<id>_summary.csv` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<(), ExperimentError> {
        std::fs::create_dir_all(dir)?;
        self.write_runs_csv(std::fs::File::create(dir.join(format!("{}_runs.csv", self.id)))?)?;
        self.write_summary_csv(std::fs::File::create(dir.join(format!("{}_summary.csv", self.id)))?)?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(rows: &[ExperimentRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.cell.clone(),
            r.seed.to_string(),
            r.mode.to_string(),
            opt(r.mean_travel_time_s),
            opt(r.delta_pct),
            r.odas_issued.to_string(),
            r.lane_changes.to_string(),
            r.aborts.to_string(),
            r.beacon_delivery_ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ExperimentRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(RUNS_CSV_HEADER) {
        return Err(ExperimentError::InvalidSpec("unexpected runs CSV header".into()));
    }
    let bad = |what: &str, v: &str| ExperimentError::InvalidSpec(format!("bad {what} `{v}`"));
    let opt_f = |v: &str| -> Result<Option<f64>, ExperimentError> {
        if v.is_empty() {
            Ok(None)
        } else {
            v.parse().map(Some).map_err(|_| bad("number", v))
        }
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(ExperimentRow {
            experiment_id: rec[0].to_string(),
            cell: rec[1].to_string(),
            seed: rec[2].parse().map_err(|_| bad("seed", &rec[2]))?,
            mode: rec[3].parse().map_err(|_| bad("mode", &rec[3]))?,
            mean_travel_time_s: opt_f(&rec[4])?,
            delta_pct: opt_f(&rec[5])?,
            odas_issued: rec[6].parse().map_err(|_| bad("count", &rec[6]))?,
            lane_changes: rec[7].parse().map_err(|_| bad("count", &rec[7]))?,
            aborts: rec[8].parse().map_err(|_| bad("count", &rec[8]))?,
            beacon_delivery_ratio: rec[9].parse().map_err(|_| bad("number", &rec[9]))?,
        });
    }
    Ok(rows)
}

/// Per-cell delta statistics recomputed from runs-CSV rows, in first-seen cell order.
pub fn summarize_rows(rows: &[ExperimentRow]) -> Result<Vec<(String, DeltaSummary)>, ExperimentError> {
    let mut order: Vec<String> = Vec::new();
    let mut deltas: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.mode != SystemMode::Off) {
        if !deltas.contains_key(&r.cell) {
            order.push(r.cell.clone());
        }
        deltas.entry(r.cell.clone()).or_default().push(r.delta_pct.ok_or(ExperimentError::MissingDelta(r.seed))?);
    }
    order.into_iter().map(|c| summarize(&deltas[&c]).map(|s| (c, s))).collect()
}

/// Long-format rows `experiment_id,cell,seed,mode,metric,value` for plotting tools.
pub fn write_plot_data<W: Write>(rows: &[ExperimentRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["experiment_id", "cell", "seed", "mode", "metric", "value"])?;
    for r in rows {
        let metrics = [
            ("mean_travel_time_s", r.mean_travel_time_s),
            ("delta_pct", r.delta_pct),
            ("odas_issued", Some(r.odas_issued as f64)),
            ("lane_changes", Some(r.lane_changes as f64)),
            ("aborts", Some(r.aborts as f64)),
            ("beacon_delivery_ratio", Some(r.beacon_delivery_ratio)),
        ];
        for (name, value) in metrics {
            if let Some(v) = value {
                w.write_record([&r.experiment_id, &r.cell, &r.seed.to_string(), r.mode.as_str(), name, &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_delta() {
        let s = summarize(&[-5.0]).unwrap();
        assert_eq!((s.n, s.mean, s.min, s.max, s.se), (1, -5.0, -5.0, -5.0, 0.0));
    }

    #[test]
    fn two_deltas() {
        let s = summarize(&[-10.0, -8.0]).unwrap();
        assert_eq!(s.mean, -9.0);
        assert_eq!((s.min, s.max), (-10.0, -8.0));
        assert!((s.se - 1.0).abs() < 1e-12);
        assert!(matches!(summarize(&[]), Err(ExperimentError::EmptyInput)));
    }

    #[test]
    fn matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..100).map(|_| rng.random_range(-20.0..5.0)).collect();
        let s = summarize(&xs).unwrap();
        // Welford's online update as the independent oracle
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for &x in &xs {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        let se = (m2 / (n - 1.0) / n).sqrt();
        assert!((s.mean - mean).abs() <= 1e-12 * mean.abs());
        assert!((s.se - se).abs() <= 1e-12 * se);
        assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn t_test_reference_values() {
        // diffs 1..=5 minus 4: mean -1, sd 1.5811, t = -1.4142 with 4 df
        let control = [4.0; 5];
        let treatment = [1.0, 2.0, 3.0, 4.0, 5.0];
        let t = paired_t_test(&treatment, &control).unwrap();
        assert!((t.t + std::f64::consts::SQRT_2).abs() < 1e-12);
        // one-sided p for t = -sqrt(2), 4 df
        assert!((t.p_less - 0.11509982054024949).abs() < 1e-9, "{}", t.p_less);
        assert!((t.p_two_sided - 2.0 * t.p_less).abs() < 1e-12);
        let same = paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(same.p_two_sided, 1.0);
    }

    #[test]
    fn spec_shapes() {
        let base = ScenarioConfig::default();
        let seeds: Vec<u64> = (0..30).collect();
        let c = ExperimentSpec::new(ExperimentId::CongestionEffect, base.clone(), seeds.clone());
        assert_eq!(c.cells.len(), 3);
        assert_eq!(c.cells.len() * c.seeds.len(), 90);
        let o = ExperimentSpec::new(ExperimentId::OdaImpact, base.clone(), seeds.clone());
        assert_eq!(o.cells.iter().map(|c| c.oda_budget).collect::<Vec<_>>(), ODA_BUDGET_GRID);
        assert!(o.cells.iter().all(|c| c.density == DensityLevel::Medium));
        let s = ExperimentSpec::new(ExperimentId::SystemEffect, base.clone(), vec![1]);
        assert!(matches!(s.validate(), Err(ExperimentError::InvalidSpec(_))));
        assert_eq!("oda-impact".parse::<ExperimentId>(), Ok(ExperimentId::OdaImpact));
    }

    #[test]
    fn small_experiment_round_trips_through_csv() {
        let base = ScenarioConfig { duration_s: 90.0, max_vehicles: 40, ..ScenarioConfig::default() };
        let spec = ExperimentSpec::new(ExperimentId::CongestionEffect, base, vec![1, 2, 3]);
        let result = run_experiment(&spec).unwrap();
        assert_eq!(result.summaries.len(), 3);
        for (cell, pairs) in &result.runs {
            let seeds: Vec<u64> = pairs.iter().map(|p| p.treatment.seed).collect();
            let off_seeds: Vec<u64> = pairs.iter().map(|p| p.off.seed).collect();
            assert_eq!(seeds, vec![1, 2, 3], "{}", cell.label);
            assert_eq!(seeds, off_seeds);
        }
        let mut buf = Vec::new();
        result.write_runs_csv(&mut buf).unwrap();
        let rows = read_rows(buf.as_slice()).unwrap();
        assert_eq!(rows, result.rows());
        let again = summarize_rows(&rows).unwrap();
        for ((label, s), summary) in again.iter().zip(&result.summaries) {
            assert_eq!(label, &summary.cell.label);
            assert_eq!(s, &summary.delta);
        }
    }
}
