//! Per-run results and their CSV form.
//!
//! The run CSV has one `traversal` row per completed corridor traversal and
//! a final `summary` row:
//!
//! ```text
//! row,elp,start_s,travel_time_s,mean_travel_time_s,lane_changes,aborts,odas_issued,odas_answered,beacons_sent,beacons_delivered,beacon_delivery_ratio
//! ```
//!
//! Columns that do not apply to a row are left empty. Floats are written in
//! shortest round-trip form.

use std::io::Write;

use crate::codec::Elp;
use crate::config::{DensityLevel, SystemMode};

pub const RUN_CSV_HEADER: [&str; 12] = [
    "row",
    "elp",
    "start_s",
    "travel_time_s",
    "mean_travel_time_s",
    "lane_changes",
    "aborts",
    "odas_issued",
    "odas_answered",
    "beacons_sent",
    "beacons_delivered",
    "beacon_delivery_ratio",
];

/// One full pass over the corridor, entrance to exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Traversal {
    pub elp: Elp,
    pub start_s: f64,
    pub travel_time_s: f64,
}

/// Safety violations seen by the post-step auditor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AuditCounts {
    /// Same-lane bumper gaps below the minimum.
    pub overlaps: u64,
    /// Speeds outside `[0, 45]` m/s or above the driver's desired speed.
    pub speed_violations: u64,
    pub direction_flips: u64,
}

impl AuditCounts {
    pub fn total(&self) -> u64 {
        self.overlaps + self.speed_violations + self.direction_flips
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub mode: SystemMode,
    pub density: DensityLevel,
    pub vehicle_count: u32,
    pub traversals: Vec<Traversal>,
    pub mean_travel_time_s: Option<f64>,
    /// Percentage change of the mean travel time against the matched Off run.
    pub travel_time_delta_pct: Option<f64>,
    pub lane_change_attempts: u64,
    pub lane_change_aborts: u64,
    pub odas_issued: u64,
    pub odas_answered: u64,
    pub max_odas_per_vehicle: u32,
    pub beacons_sent: u64,
    pub beacons_delivered: u64,
    pub audit: AuditCounts,
}

impl RunMetrics {
    pub fn lane_changes(&self) -> u64 {
        self.lane_change_attempts - self.lane_change_aborts
    }

    pub fn beacon_delivery_ratio(&self) -> f64 {
        if self.beacons_sent == 0 {
            0.0
        } else {
            self.beacons_delivered as f64 / self.beacons_sent as f64
        }
    }

    pub fn mean_of(traversals: &[Traversal]) -> Option<f64> {
        if traversals.is_empty() {
            return None;
        }
        Some(traversals.iter().map(|t| t.travel_time_s).sum::<f64>() / traversals.len() as f64)
    }

    /// Sets the delta against a matched Off run of the same seed.
    pub fn with_delta(mut self, off: &RunMetrics) -> Self {
        self.travel_time_delta_pct = match (self.mean_travel_time_s, off.mean_travel_time_s) {
            (Some(t), Some(o)) if o > 0.0 => Some((t - o) / o * 100.0),
            _ => None,
        };
        self
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(RUN_CSV_HEADER)?;
        for t in &self.traversals {
            let (elp, start, tt) = (t.elp.to_string(), t.start_s.to_string(), t.travel_time_s.to_string());
            w.write_record(["traversal", &elp, &start, &tt, "", "", "", "", "", "", "", ""])?;
        }
        let mean = self.mean_travel_time_s.map(|m| m.to_string()).unwrap_or_default();
        w.write_record([
            "summary".to_string(),
            String::new(),
            String::new(),
            String::new(),
            mean,
            self.lane_changes().to_string(),
            self.lane_change_aborts.to_string(),
            self.odas_issued.to_string(),
            self.odas_answered.to_string(),
            self.beacons_sent.to_string(),
            self.beacons_delivered.to_string(),
            self.beacon_delivery_ratio().to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// Reads the traversal rows back from a run CSV.
pub fn read_run_traversals<R: std::io::Read>(input: R) -> Result<Vec<Traversal>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[0] != "traversal" {
            continue;
        }
        let parse = |i: usize| rec[i].parse::<f64>().map_err(|e| csv::Error::from(std::io::Error::other(e)));
        out.push(Traversal {
            elp: Elp(rec[1].parse().map_err(|e| csv::Error::from(std::io::Error::other(e)))?),
            start_s: parse(2)?,
            travel_time_s: parse(3)?,
        });
    }
    Ok(out)
}
