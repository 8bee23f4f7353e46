//! Roadside unit: registers vehicles from their beacons, keeps per-vehicle
//! speed and behaviour history, and answers on-demand analysis (ODA)
//! requests from a vehicle deciding between candidate gaps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{
    analyse_speed, classify_avsud, compute_aavs, compute_acs, compute_avsud, decide, rank_choices, AnalyticsConfig,
    AnalyticsError, AvSudClass, ChoiceVerdict, Decision, FleetEntry, FleetSnapshot, SpeedWindow, SuddenEventCounts,
    TrajectoryPoint,
};
use crate::codec::{Beacon, Elp};
use crate::geometry::{CorridorConfig, Direction, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RsuError {
    #[error("sender {elp} is {distance_m:.1} m away, beyond coverage of {radius_m} m")]
    OutOfRange { elp: Elp, distance_m: f64, radius_m: f64 },
    #[error("beacon from {elp} is not on the corridor (y = {y_m} m)")]
    OffCorridor { elp: Elp, y_m: f64 },
    #[error("beacon from {elp} rejected: {source}")]
    InvalidBeacon { elp: Elp, source: AnalyticsError },
    #[error("decider {0} is not registered at this RSU")]
    UnknownDecider(Elp),
    #[error("ODA request has no candidate gaps")]
    NoCandidates,
    #[error("invalid gap {choice_id}: {reason}")]
    InvalidGap { choice_id: u16, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RsuId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsuConfig {
    /// Radius around a gap's centre within which surrounding vehicles are evaluated.
    pub neighborhood_radius_m: f64,
    /// Records not refreshed within this window are dropped.
    pub expiry_ms: u64,
}

impl Default for RsuConfig {
    fn default() -> Self {
        Self { neighborhood_radius_m: 50.0, expiry_ms: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub elp: Elp,
    pub speed_window: SpeedWindow,
    pub last_pos: Point,
    pub last_lane: u8,
    pub last_speed_mps: f64,
    pub last_timestamp_ms: u64,
    pub last_heard_ms: u64,
    pub last_seq: u32,
    pub event_counts: SuddenEventCounts,
    /// Beacons inferred lost from jumps in the sequence number.
    pub missed_beacons: u64,
}

impl VehicleRecord {
    pub fn direction(&self, corridor: &CorridorConfig) -> Direction {
        corridor.direction_of(self.last_lane)
    }

    fn last_point(&self) -> TrajectoryPoint {
        TrajectoryPoint { timestamp_ms: self.last_timestamp_ms, speed_mps: self.last_speed_mps, lane: self.last_lane }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    Registered,
    Updated,
    /// Sequence number not newer than the last one accepted; state untouched.
    Dropped,
}

/// A vacant space in an adjacent lane the decider could move into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDescriptor {
    pub choice_id: u16,
    pub lane_index: u8,
    pub center_pos: Point,
    pub length_m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdaRequest {
    pub decider_elp: Elp,
    pub decider_beacon: Beacon,
    pub decider_acs_mps: f64,
    pub candidate_gaps: Vec<GapDescriptor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdaResponse {
    pub decider_elp: Elp,
    /// Best first.
    pub verdicts: Vec<ChoiceVerdict>,
    pub issued_at_ms: u64,
}

impl OdaResponse {
    pub fn top_preferred(&self) -> Option<&ChoiceVerdict> {
        self.verdicts.iter().find(|v| v.decision == Decision::Preferred)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsuState {
    pub id: RsuId,
    pub position: Point,
    pub coverage_radius_m: f64,
    pub corridor: CorridorConfig,
    pub config: RsuConfig,
    pub analytics: AnalyticsConfig,
    pub registry: BTreeMap<Elp, VehicleRecord>,
    pub clock_ms: u64,
}

impl RsuState {
    pub fn new(
        id: RsuId,
        position: Point,
        coverage_radius_m: f64,
        corridor: CorridorConfig,
        config: RsuConfig,
        analytics: AnalyticsConfig,
    ) -> Self {
        Self { id, position, coverage_radius_m, corridor, config, analytics, registry: BTreeMap::new(), clock_ms: 0 }
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    pub fn record(&self, elp: Elp) -> Option<&VehicleRecord> {
        self.registry.get(&elp)
    }

    /// Current ACS of a registered vehicle, from samples no older than the window age.
    pub fn acs_of(&self, elp: Elp, now_ms: u64) -> Option<f64> {
        let rec = self.registry.get(&elp)?;
        let mut w = rec.speed_window.clone();
        w.evict_stale(now_ms);
        compute_acs(&w).ok()
    }

    pub fn ingest_beacon(&mut self, b: &Beacon, now_ms: u64) -> Result<IngestOutcome, RsuError> {
        let h = &b.header;
        let pos = h.position_m();
        let distance_m = pos.distance(&self.position);
        if distance_m > self.coverage_radius_m {
            return Err(RsuError::OutOfRange { elp: h.elp, distance_m, radius_m: self.coverage_radius_m });
        }
        let lane = self.corridor.lane_at(pos.y).ok_or(RsuError::OffCorridor { elp: h.elp, y_m: pos.y })?;
        let speed = h.speed_mps().abs();
        self.clock_ms = self.clock_ms.max(now_ms);
        let point = TrajectoryPoint { timestamp_ms: h.timestamp_ms, speed_mps: speed, lane };
        let sudden = self.analytics.sudden();

        if let Some(rec) = self.registry.get_mut(&h.elp) {
            if h.seq <= rec.last_seq || h.timestamp_ms <= rec.last_timestamp_ms {
                return Ok(IngestOutcome::Dropped);
            }
            rec.speed_window
                .push(h.timestamp_ms, speed)
                .map_err(|source| RsuError::InvalidBeacon { elp: h.elp, source })?;
            rec.speed_window.evict_stale(h.timestamp_ms);
            let prev = rec.last_point();
            rec.event_counts.record_interval(&prev, &point, &sudden);
            rec.missed_beacons += (h.seq - rec.last_seq - 1) as u64;
            rec.last_seq = h.seq;
            rec.last_pos = pos;
            rec.last_lane = lane;
            rec.last_speed_mps = speed;
            rec.last_timestamp_ms = h.timestamp_ms;
            rec.last_heard_ms = now_ms;
            return Ok(IngestOutcome::Updated);
        }

        let mut speed_window = self.analytics.new_window();
        speed_window.push(h.timestamp_ms, speed).map_err(|source| RsuError::InvalidBeacon { elp: h.elp, source })?;
        self.registry.insert(
            h.elp,
            VehicleRecord {
                elp: h.elp,
                speed_window,
                last_pos: pos,
                last_lane: lane,
                last_speed_mps: speed,
                last_timestamp_ms: h.timestamp_ms,
                last_heard_ms: now_ms,
                last_seq: h.seq,
                event_counts: SuddenEventCounts::default(),
                missed_beacons: 0,
            },
        );
        Ok(IngestOutcome::Registered)
    }

    /// Forgets vehicles not heard from within the expiry window.
    pub fn expire_stale(&mut self, now_ms: u64) {
        self.clock_ms = self.clock_ms.max(now_ms);
        let expiry = self.config.expiry_ms;
        self.registry.retain(|_, rec| now_ms.saturating_sub(rec.last_heard_ms) <= expiry);
    }

    /// Registered vehicles in the gap's lane within `radius_m` of its centre,
    /// excluding `exclude`. Vehicles without a current ACS are skipped.
    pub fn neighborhood(&self, gap: &GapDescriptor, radius_m: f64, exclude: Option<Elp>, now_ms: u64) -> FleetSnapshot {
        let threshold = self.analytics.avsud_threshold;
        let entries = self
            .registry
            .values()
            .filter(|rec| Some(rec.elp) != exclude)
            .filter(|rec| rec.last_lane == gap.lane_index)
            .filter(|rec| rec.last_pos.distance(&gap.center_pos) <= radius_m)
            .filter_map(|rec| {
                let mut w = rec.speed_window.clone();
                w.evict_stale(now_ms);
                let acs_mps = compute_acs(&w).ok()?;
                let avsud = compute_avsud(&rec.event_counts, threshold).ok().map(|s| s.value);
                Some(FleetEntry { elp: rec.elp, acs_mps, avsud })
            })
            .collect();
        FleetSnapshot { entries }
    }

    fn validate_gap(&self, gap: &GapDescriptor, direction: Direction) -> Result<(), RsuError> {
        let bad = |reason: String| Err(RsuError::InvalidGap { choice_id: gap.choice_id, reason });
        if !self.corridor.is_valid_lane(gap.lane_index) {
            return bad(format!("lane {} does not exist", gap.lane_index));
        }
        if !(gap.length_m > 0.0) {
            return bad(format!("length {} m is not positive", gap.length_m));
        }
        if self.corridor.direction_of(gap.lane_index) != direction {
            return bad(format!("lane {} runs against the decider", gap.lane_index));
        }
        Ok(())
    }

    /// Evaluates every candidate gap and returns the verdicts best first.
    ///
    /// A gap with nobody around it is `Preferred`: there is no surrounding
    /// traffic to be slower than, and no behaviour to flag.
    pub fn handle_oda(&self, req: &OdaRequest, now_ms: u64) -> Result<OdaResponse, RsuError> {
        let decider = self.registry.get(&req.decider_elp).ok_or(RsuError::UnknownDecider(req.decider_elp))?;
        if req.candidate_gaps.is_empty() {
            return Err(RsuError::NoCandidates);
        }
        let decider_lane = self.corridor.lane_at(req.decider_beacon.header.position_m().y).unwrap_or(decider.last_lane);
        let direction = self.corridor.direction_of(decider_lane);
        let threshold = self.analytics.avsud_threshold;

        let mut verdicts = Vec::with_capacity(req.candidate_gaps.len());
        for gap in &req.candidate_gaps {
            self.validate_gap(gap, direction)?;
            let snap = self.neighborhood(gap, self.config.neighborhood_radius_m, Some(req.decider_elp), now_ms);
            let verdict = match compute_aavs(&snap) {
                Ok(aavs) => {
                    let class = classify_avsud(snap.mean_avsud(), threshold);
                    ChoiceVerdict {
                        choice_id: gap.choice_id,
                        lane_index: gap.lane_index,
                        decision: decide(analyse_speed(req.decider_acs_mps, aavs), class),
                        aavs_mps: Some(aavs),
                        avsud_class: class,
                    }
                }
                Err(_) => ChoiceVerdict {
                    choice_id: gap.choice_id,
                    lane_index: gap.lane_index,
                    decision: Decision::Preferred,
                    aavs_mps: None,
                    avsud_class: AvSudClass::Low,
                },
            };
            verdicts.push(verdict);
        }
        Ok(OdaResponse { decider_elp: req.decider_elp, verdicts: rank_choices(verdicts, decider_lane), issued_at_ms: now_ms })
    }
}
