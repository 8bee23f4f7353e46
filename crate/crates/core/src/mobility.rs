//! Vehicle dynamics on the corridor: IDM car following, gap sensing, the
//! unassisted lane choice and execution of RSU advice.
//!
//! Positions are tracked as *progress*: metres travelled along the vehicle's
//! direction of travel since the corridor entrance, in `[0, length)`. The
//! front bumper is at the progress point. Vehicles leaving the far end
//! re-enter at the entrance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::MAX_SPEED_MPS;
use crate::codec::Elp;
use crate::geometry::{CorridorConfig, Direction, Point};
use crate::rsu::{GapDescriptor, OdaResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MobilityError {
    #[error("advice issued at {issued_at_ms} ms is stale at {now_ms} ms")]
    StaleAdvice { issued_at_ms: u64, now_ms: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverMode {
    /// Decides from what is visible.
    Baseline,
    /// Asks the RSU before changing lanes.
    Assisted,
    /// Uses the cell-density extrapolation baseline.
    StBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub max_accel_mps2: f64,
    pub comfortable_decel_mps2: f64,
    pub time_headway_s: f64,
    pub min_gap_m: f64,
    pub accel_exponent: f64,
    /// Physical braking limit; IDM output is clipped to it.
    pub max_decel_mps2: f64,
    pub vehicle_length_m: f64,
    pub desired_speed_min_mps: f64,
    pub desired_speed_max_mps: f64,
    pub decision_period_s: f64,
    /// Relative density improvement a lane must offer before a driver moves.
    pub hysteresis: f64,
    pub advice_staleness_ms: u64,
    /// Deceleration a lane change may impose on the driver or its new follower.
    pub lane_change_safe_decel_mps2: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            max_accel_mps2: 1.5,
            comfortable_decel_mps2: 2.0,
            time_headway_s: 1.2,
            min_gap_m: 2.0,
            accel_exponent: 4.0,
            max_decel_mps2: 9.0,
            vehicle_length_m: 5.0,
            desired_speed_min_mps: 15.0,
            desired_speed_max_mps: 45.0,
            decision_period_s: 2.0,
            hysteresis: 0.1,
            advice_staleness_ms: 1_000,
            lane_change_safe_decel_mps2: 9.0,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("max_accel_mps2", self.max_accel_mps2),
            ("comfortable_decel_mps2", self.comfortable_decel_mps2),
            ("time_headway_s", self.time_headway_s),
            ("min_gap_m", self.min_gap_m),
            ("accel_exponent", self.accel_exponent),
            ("max_decel_mps2", self.max_decel_mps2),
            ("vehicle_length_m", self.vehicle_length_m),
            ("decision_period_s", self.decision_period_s),
            ("lane_change_safe_decel_mps2", self.lane_change_safe_decel_mps2),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(0.0 <= self.desired_speed_min_mps
            && self.desired_speed_min_mps <= self.desired_speed_max_mps
            && self.desired_speed_max_mps <= MAX_SPEED_MPS)
        {
            return Err(format!("desired speed range must lie within [0, {MAX_SPEED_MPS}] and be ordered"));
        }
        if !(0.0..1.0).contains(&self.hysteresis) {
            return Err("hysteresis must be in [0, 1)".into());
        }
        Ok(())
    }

    /// IDM acceleration for speed `v` with desired speed `v0`, optionally
    /// following a leader at bumper gap `gap_m` driving at `v_lead`.
    pub fn idm_accel(&self, v: f64, v0: f64, leader: Option<(f64, f64)>) -> f64 {
        let free = if v0 > 0.0 { 1.0 - (v / v0).powf(self.accel_exponent) } else { -1.0 };
        let interaction = match leader {
            Some((gap_m, v_lead)) => {
                let dv = v - v_lead;
                let s_star = self.min_gap_m
                    + (v * self.time_headway_s + v * dv / (2.0 * (self.max_accel_mps2 * self.comfortable_decel_mps2).sqrt()))
                        .max(0.0);
                let s = gap_m.max(1e-3);
                (s_star / s).powi(2)
            }
            None => 0.0,
        };
        (self.max_accel_mps2 * (free - interaction)).clamp(-self.max_decel_mps2, self.max_accel_mps2)
    }

    /// Bumper gap at which IDM is stationary at speed `v` behind a leader
    /// at the same speed, for `v < v0`.
    pub fn equilibrium_gap(&self, v: f64, v0: f64) -> f64 {
        let s_star = self.min_gap_m + v * self.time_headway_s;
        s_star / (1.0 - (v / v0).powf(self.accel_exponent)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState {
    pub elp: Elp,
    pub lane_index: u8,
    /// Metres along the direction of travel, `[0, corridor length)`.
    pub progress_m: f64,
    pub speed_mps: f64,
    pub desired_speed_mps: f64,
    pub mode: DriverMode,
    pub oda_budget_remaining: u8,
    pub pending_advice: Option<OdaResponse>,
}

impl VehicleState {
    pub fn direction(&self, c: &CorridorConfig) -> Direction {
        c.direction_of(self.lane_index)
    }

    pub fn x_m(&self, c: &CorridorConfig) -> f64 {
        c.x_of(self.direction(c), self.progress_m)
    }

    pub fn position(&self, c: &CorridorConfig) -> Point {
        Point::new(self.x_m(c), c.lane_center_y(self.lane_index))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// Set when the vehicle crossed the corridor end during the step: the
    /// fraction of the step elapsed at the crossing.
    pub exit_fraction: Option<f64>,
}

/// Advances one vehicle by `dt_s` behind `leader` (same lane, ahead on the ring).
pub fn step_longitudinal(
    v: &VehicleState,
    leader: Option<&VehicleState>,
    dt_s: f64,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> StepOutcome {
    let gap = leader.map(|l| corridor.ahead_distance(v.progress_m, l.progress_m) - cfg.vehicle_length_m);
    let acc = cfg.idm_accel(v.speed_mps, v.desired_speed_mps, gap.zip(leader.map(|l| l.speed_mps)));
    let mut speed = (v.speed_mps + acc * dt_s).clamp(0.0, v.desired_speed_mps);
    let mut dx = 0.5 * (v.speed_mps + speed) * dt_s;
    if let (Some(gap), Some(l)) = (gap, leader) {
        // The leader never moves backwards, so its old rear is a safe bound.
        let room = (gap - cfg.min_gap_m).max(0.0);
        if dx > room {
            dx = room;
            speed = speed.min(l.speed_mps);
        }
    }
    let mut progress = v.progress_m + dx;
    let mut exit_fraction = None;
    if progress >= corridor.length_m {
        exit_fraction = Some(if dx > 0.0 { (corridor.length_m - v.progress_m) / dx } else { 1.0 });
        progress -= corridor.length_m;
    }
    StepOutcome { state: VehicleState { progress_m: progress, speed_mps: speed, ..v.clone() }, exit_fraction }
}

/// Per-lane ordering of a vehicle set, for neighbour queries on the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneView {
    /// For each lane, `(progress, vehicle index)` sorted ascending.
    lanes: Vec<Vec<(f64, usize)>>,
}

impl LaneView {
    pub fn build(vehicles: &[VehicleState], corridor: &CorridorConfig) -> Self {
        let mut lanes = vec![Vec::new(); corridor.lane_count as usize];
        for (i, v) in vehicles.iter().enumerate() {
            lanes[v.lane_index as usize].push((v.progress_m, i));
        }
        for lane in &mut lanes {
            lane.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        Self { lanes }
    }

    pub fn lane(&self, lane: u8) -> &[(f64, usize)] {
        &self.lanes[lane as usize]
    }

    /// Nearest vehicle in `lane` at or ahead of progress `p`, other than
    /// `exclude`, with its forward distance.
    pub fn leader_of(&self, lane: u8, p: f64, exclude: Option<usize>, corridor: &CorridorConfig) -> Option<(usize, f64)> {
        let l = &self.lanes[lane as usize];
        let start = l.partition_point(|e| e.0 < p);
        (0..l.len())
            .map(|k| l[(start + k) % l.len()])
            .find(|e| Some(e.1) != exclude)
            .map(|(q, i)| (i, corridor.ahead_distance(p, q)))
    }

    /// Nearest vehicle in `lane` at or behind progress `p`, other than
    /// `exclude`, with its distance back.
    pub fn follower_of(&self, lane: u8, p: f64, exclude: Option<usize>, corridor: &CorridorConfig) -> Option<(usize, f64)> {
        let l = &self.lanes[lane as usize];
        let n = l.len();
        let end = l.partition_point(|e| e.0 <= p);
        (1..=n)
            .map(|k| l[(end + n - k) % n])
            .find(|e| Some(e.1) != exclude)
            .map(|(q, i)| (i, corridor.ahead_distance(q, p)))
    }

    /// Vehicles in `lane` within `range_m` ahead of `p` (inclusive), other than `exclude`.
    pub fn count_ahead(&self, lane: u8, p: f64, range_m: f64, exclude: Option<usize>, corridor: &CorridorConfig) -> usize {
        let l = &self.lanes[lane as usize];
        let start = l.partition_point(|e| e.0 < p);
        (0..l.len())
            .map(|k| l[(start + k) % l.len()])
            .take_while(|e| corridor.ahead_distance(p, e.0) <= range_m)
            .filter(|e| Some(e.1) != exclude)
            .count()
    }

    /// Moves vehicle `idx` from one lane list to another.
    pub fn relocate(&mut self, idx: usize, from: u8, to: u8, progress: f64) {
        self.lanes[from as usize].retain(|e| e.1 != idx);
        let l = &mut self.lanes[to as usize];
        let at = l.partition_point(|e| e.0.total_cmp(&progress).then(e.1.cmp(&idx)).is_lt());
        l.insert(at, (progress, idx));
    }
}

/// Whether vehicle `idx` could move into `lane` right now: physical room on
/// both sides and no braking beyond the safe limit for it or its new follower.
pub fn gap_acceptable(
    idx: usize,
    lane: u8,
    world: &[VehicleState],
    view: &LaneView,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> bool {
    let ego = &world[idx];
    let p = ego.progress_m;
    let len = cfg.vehicle_length_m;
    if let Some((j, d)) = view.leader_of(lane, p, Some(idx), corridor) {
        let gap = d - len;
        if gap < cfg.min_gap_m {
            return false;
        }
        let acc = cfg.idm_accel(ego.speed_mps, ego.desired_speed_mps, Some((gap, world[j].speed_mps)));
        if acc < -cfg.lane_change_safe_decel_mps2 {
            return false;
        }
    }
    if let Some((j, d)) = view.follower_of(lane, p, Some(idx), corridor) {
        let gap = d - len;
        if gap < cfg.min_gap_m {
            return false;
        }
        let f = &world[j];
        let acc = cfg.idm_accel(f.speed_mps, f.desired_speed_mps, Some((gap, ego.speed_mps)));
        if acc < -cfg.lane_change_safe_decel_mps2 {
            return false;
        }
    }
    true
}

/// Free space alongside the vehicle in each adjacent same-direction lane
/// that it could move into, clipped to the visual range. Ordered by lane.
pub fn sense_choices(
    idx: usize,
    world: &[VehicleState],
    view: &LaneView,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> Vec<GapDescriptor> {
    let ego = &world[idx];
    let p = ego.progress_m;
    let vr = corridor.visual_range_m;
    let dir = ego.direction(corridor);
    let mut out = Vec::new();
    for lane in corridor.adjacent_lanes(ego.lane_index) {
        if !gap_acceptable(idx, lane, world, view, cfg, corridor) {
            continue;
        }
        // Free interval relative to p: follower front to leader rear.
        let ahead = view.leader_of(lane, p, Some(idx), corridor).map_or(vr, |(_, d)| (d - cfg.vehicle_length_m).min(vr));
        let behind = view.follower_of(lane, p, Some(idx), corridor).map_or(vr, |(_, d)| d.min(vr));
        let center = (p + (ahead - behind) / 2.0).rem_euclid(corridor.length_m);
        out.push(GapDescriptor {
            choice_id: out.len() as u16,
            lane_index: lane,
            center_pos: Point::new(corridor.x_of(dir, center), corridor.lane_center_y(lane)),
            length_m: ahead + behind,
        });
    }
    out
}

/// Vehicles per metre visible ahead of progress `p` in `lane`.
pub fn visible_density(
    idx: usize,
    lane: u8,
    world: &[VehicleState],
    view: &LaneView,
    corridor: &CorridorConfig,
) -> f64 {
    let vr = corridor.visual_range_m;
    view.count_ahead(lane, world[idx].progress_m, vr, Some(idx), corridor) as f64 / vr
}

/// Choices whose visible downstream density beats the current lane by the
/// hysteresis margin, best first (ties to the lower lane).
pub fn attractive_choices(
    idx: usize,
    choices: &[GapDescriptor],
    world: &[VehicleState],
    view: &LaneView,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> Vec<GapDescriptor> {
    let current = visible_density(idx, world[idx].lane_index, world, view, corridor);
    if current <= 0.0 {
        return Vec::new();
    }
    let mut scored: Vec<(f64, GapDescriptor)> = choices
        .iter()
        .map(|g| (visible_density(idx, g.lane_index, world, view, corridor), *g))
        .filter(|(d, _)| *d < current * (1.0 - cfg.hysteresis))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.lane_index.cmp(&b.1.lane_index)));
    scored.into_iter().map(|(_, g)| g).collect()
}

/// The unassisted driver: heads for the adjacent lane that looks emptiest
/// within sight, if it beats the current lane by the hysteresis margin.
pub fn baseline_lane_decision(
    idx: usize,
    choices: &[GapDescriptor],
    world: &[VehicleState],
    view: &LaneView,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> Option<u8> {
    attractive_choices(idx, choices, world, view, cfg, corridor).first().map(|g| g.lane_index)
}

/// Follows the top-ranked preferred verdict; stays when nothing is preferred.
pub fn assisted_lane_decision(
    v: &VehicleState,
    advice: &OdaResponse,
    now_ms: u64,
    staleness_ms: u64,
) -> Result<Option<u8>, MobilityError> {
    if now_ms.saturating_sub(advice.issued_at_ms) > staleness_ms {
        return Err(MobilityError::StaleAdvice { issued_at_ms: advice.issued_at_ms, now_ms });
    }
    Ok(advice.top_preferred().map(|c| c.lane_index).filter(|&l| l != v.lane_index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneChangeOutcome {
    Changed,
    /// The gap closed since the decision.
    Aborted,
    /// Not an adjacent same-direction lane.
    Rejected,
}

/// Moves vehicle `idx` into `target` if the gap is still acceptable, keeping
/// `view` in sync.
pub fn execute_lane_change(
    idx: usize,
    target: u8,
    world: &mut [VehicleState],
    view: &mut LaneView,
    cfg: &DriverConfig,
    corridor: &CorridorConfig,
) -> LaneChangeOutcome {
    let from = world[idx].lane_index;
    if !corridor.adjacent_lanes(from).any(|l| l == target) {
        return LaneChangeOutcome::Rejected;
    }
    if !gap_acceptable(idx, target, world, view, cfg, corridor) {
        return LaneChangeOutcome::Aborted;
    }
    world[idx].lane_index = target;
    view.relocate(idx, from, target, world[idx].progress_m);
    LaneChangeOutcome::Changed
}
