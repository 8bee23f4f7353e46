//! Scripted hidden-congestion scene.
//!
//! A decider at 30 m/s in the middle eastbound lane has a slow platoon in
//! sight ahead. The left lane looks empty within the driver's 60 m sight
//! line, but a platoon that has just braked hard from 30 to 15 m/s sits
//! right beyond it. The right lane carries one calm vehicle at 25 m/s.
//!
//! An unassisted driver takes the visually empty left lane and runs into
//! the hidden platoon. An assisted driver asks the roadside unit, which
//! flags the left lane as dangerous and prefers the right one.

use crate::codec::{Beacon, BeaconHeader, Elp, MIN_INTERVAL_MS};
use crate::config::{ScenarioConfig, SystemMode};
use crate::geometry::{Direction, Point};
use crate::mobility::{DriverMode, VehicleState};
use crate::rsu::OdaResponse;
use crate::sim::{LaneChangeEvent, SimError, Simulation, TICK_MS};

pub const DECIDER: Elp = Elp(1);
/// Ticks of synthetic history recorded before the scene starts.
pub const START_TICK: u64 = 30;

const LEFT: u8 = 0;
const MIDDLE: u8 = 1;
const RIGHT: u8 = 2;
const HIDDEN_PLATOON_START_M: f64 = 70.0;
const HIDDEN_PLATOON_LEN: usize = 8;
const HIDDEN_SPACING_M: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub decider_mode: DriverMode,
    /// First lane change the decider made.
    pub first_change: Option<LaneChangeEvent>,
    /// The decider's first complete traversal.
    pub traversal_s: Option<f64>,
    /// First roadside advice the decider received.
    pub advice: Option<OdaResponse>,
}

fn vehicle(elp: u64, lane: u8, progress_m: f64, speed: f64, mode: DriverMode) -> VehicleState {
    VehicleState {
        elp: Elp(elp),
        lane_index: lane,
        progress_m,
        speed_mps: speed,
        desired_speed_mps: speed,
        mode,
        oda_budget_remaining: 0,
        pending_advice: None,
    }
}

fn scene_config() -> ScenarioConfig {
    ScenarioConfig { duration_s: 150.0, mode: SystemMode::Off, ..ScenarioConfig::default() }
}

/// Speed of a hidden-platoon vehicle `k` ticks into the pre-recorded history.
fn braking_profile(k: u64) -> f64 {
    (30.0 - 0.9 * k.saturating_sub(9) as f64).max(15.0)
}

/// Builds the scene with the decider driving in `mode`.
pub fn build(mode: DriverMode) -> Result<Simulation, SimError> {
    let cfg = scene_config();
    let mut vehicles = vec![vehicle(DECIDER.0, MIDDLE, 999.9, 30.0, mode)];
    vehicles[0].oda_budget_remaining = cfg.oda_budget;
    // slow platoon in sight in the middle lane
    for (k, p) in [30.0, 55.0, 80.0, 105.0].into_iter().enumerate() {
        vehicles.push(vehicle(10 + k as u64, MIDDLE, p, 15.0, DriverMode::Baseline));
    }
    // platoon beyond sight in the left lane
    for k in 0..HIDDEN_PLATOON_LEN {
        let p = HIDDEN_PLATOON_START_M + k as f64 * HIDDEN_SPACING_M;
        vehicles.push(vehicle(20 + k as u64, LEFT, p, 15.0, DriverMode::Baseline));
    }
    // a follower in the left lane pushes the sensed gap forward
    vehicles.push(vehicle(30, LEFT, 979.9, 28.0, DriverMode::Baseline));
    vehicles.push(vehicle(40, RIGHT, 35.0, 25.0, DriverMode::Baseline));

    let corridor = cfg.corridor;
    let rsu = Point::new(50.0, corridor.median_y());
    let cfg = ScenarioConfig { vehicle_count: Some(vehicles.len() as u32), ..cfg };
    let mut sim = Simulation::from_parts(cfg, vehicles.clone(), vec![rsu])?;
    sim.set_start_tick(START_TICK);

    for v in &vehicles {
        if v.elp == DECIDER {
            sim.set_decision_phase(v.elp, START_TICK + 1);
        } else {
            sim.lock_lane(v.elp);
        }
    }

    // The roadside unit has heard the hidden platoon brake hard.
    let c = sim.config().corridor;
    for v in vehicles.iter().filter(|v| v.lane_index == LEFT && v.progress_m < 500.0) {
        let speeds: Vec<f64> = (0..START_TICK).map(braking_profile).collect();
        let mut progress = vec![0.0; speeds.len()];
        let mut p = v.progress_m;
        let mut next_speed = v.speed_mps;
        for k in (0..speeds.len()).rev() {
            p -= 0.5 * (speeds[k] + next_speed) * TICK_MS as f64 / 1_000.0;
            progress[k] = p;
            next_speed = speeds[k];
        }
        for k in 0..speeds.len() {
            let x = c.x_of(Direction::Eastbound, progress[k]);
            let b = Beacon::new(BeaconHeader {
                seq: k as u32,
                interval_ms: MIN_INTERVAL_MS,
                timestamp_ms: k as u64 * TICK_MS,
                elp: v.elp,
                pos_x_cm: (x * 100.0).round() as i32,
                pos_y_cm: (c.lane_center_y(LEFT) * 100.0).round() as i32,
                speed_cms: (speeds[k] * 100.0).round() as i16,
                dir_cdeg: Direction::Eastbound.heading_cdeg(),
                max_p_cdbm: 0,
                min_p_cdbm: 0,
                pow_u_cdbm: 2_000,
            });
            sim.rsus_mut()[0].ingest_beacon(&b, k as u64 * TICK_MS).expect("history is in coverage");
        }
    }
    Ok(sim)
}

/// Runs the scene until the decider completes one traversal.
pub fn run(mode: DriverMode) -> Result<SceneOutcome, SimError> {
    let mut sim = build(mode)?;
    let mut advice = None;
    while !sim.is_finished() && !sim.traversals().iter().any(|t| t.elp == DECIDER) {
        sim.step();
        if let Some(a) = sim.vehicles().iter().find(|v| v.elp == DECIDER).and_then(|v| v.pending_advice.clone()) {
            advice.get_or_insert(a);
        }
    }
    Ok(SceneOutcome {
        decider_mode: mode,
        first_change: sim.lane_change_log().iter().find(|e| e.elp == DECIDER).copied(),
        traversal_s: sim.traversals().iter().find(|t| t.elp == DECIDER).map(|t| t.travel_time_s),
        advice,
    })
}
