//! Simplified spatiotemporal lane predictor used as the comparison baseline.
//!
//! Each lane is cut into fixed cells. At every decision epoch the density of
//! every cell is recorded; a cell's density one epoch ahead is extrapolated
//! linearly from its last two observations. A driver compares the predicted
//! density of the cells downstream of it in its own lane against the
//! adjacent same-direction lanes.

use std::collections::VecDeque;

use thiserror::Error;

use crate::config::StConfig;
use crate::geometry::CorridorConfig;
use crate::mobility::VehicleState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StError {
    #[error("need two epochs of cell history, have {epochs}")]
    InsufficientHistory { epochs: usize },
}

/// Per-lane cell densities (vehicles per metre) for the last two epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellHistory {
    cell_m: f64,
    cells_per_lane: usize,
    lane_count: usize,
    /// Oldest first; each snapshot is lane-major.
    snapshots: VecDeque<Vec<f64>>,
}

impl CellHistory {
    pub fn new(corridor: &CorridorConfig, st: &StConfig) -> Self {
        Self {
            cell_m: st.cell_m,
            cells_per_lane: (corridor.length_m / st.cell_m).ceil().max(1.0) as usize,
            lane_count: corridor.lane_count as usize,
            snapshots: VecDeque::with_capacity(2),
        }
    }

    pub fn cells_per_lane(&self) -> usize {
        self.cells_per_lane
    }

    pub fn epochs(&self) -> usize {
        self.snapshots.len()
    }

    pub fn cell_of(&self, progress_m: f64) -> usize {
        ((progress_m / self.cell_m).floor() as usize).min(self.cells_per_lane - 1)
    }

    /// Appends a snapshot given as `[lane][cell]` densities.
    pub fn push(&mut self, densities: Vec<Vec<f64>>) {
        debug_assert_eq!(densities.len(), self.lane_count);
        let flat: Vec<f64> = densities.into_iter().flatten().collect();
        debug_assert_eq!(flat.len(), self.lane_count * self.cells_per_lane);
        if self.snapshots.len() == 2 {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(flat);
    }

    /// Records the current cell densities of `vehicles`.
    pub fn record(&mut self, vehicles: &[VehicleState]) {
        let mut d = vec![vec![0.0; self.cells_per_lane]; self.lane_count];
        for v in vehicles {
            d[v.lane_index as usize][self.cell_of(v.progress_m)] += 1.0 / self.cell_m;
        }
        self.push(d);
    }

    /// Extrapolated density of one cell at the next epoch, floored at zero.
    pub fn predicted(&self, lane: u8, cell: usize) -> Result<f64, StError> {
        if self.snapshots.len() < 2 {
            return Err(StError::InsufficientHistory { epochs: self.snapshots.len() });
        }
        let k = lane as usize * self.cells_per_lane + cell;
        let prev = self.snapshots[0][k];
        let last = self.snapshots[1][k];
        Ok((2.0 * last - prev).max(0.0))
    }

    /// Summed predicted density over the `horizon` cells after `progress_m`.
    pub fn downstream(&self, lane: u8, progress_m: f64, horizon: u32) -> Result<f64, StError> {
        let start = self.cell_of(progress_m);
        (1..=horizon as usize).map(|k| self.predicted(lane, (start + k) % self.cells_per_lane)).sum()
    }
}

/// Picks the adjacent lane with the lowest predicted downstream density if
/// it beats the current lane by the hysteresis margin. Ties go to the lower
/// lane index; an empty prediction for the current lane means stay.
pub fn st_baseline_decision(
    v: &VehicleState,
    history: &CellHistory,
    st: &StConfig,
    hysteresis: f64,
    corridor: &CorridorConfig,
) -> Result<Option<u8>, StError> {
    let current = history.downstream(v.lane_index, v.progress_m, st.horizon_cells)?;
    if current <= 0.0 {
        return Ok(None);
    }
    let mut best: Option<(f64, u8)> = None;
    for lane in corridor.adjacent_lanes(v.lane_index) {
        let d = history.downstream(lane, v.progress_m, st.horizon_cells)?;
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, lane));
        }
    }
    Ok(best.filter(|&(d, _)| d < current * (1.0 - hysteresis)).map(|(_, l)| l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Elp;
    use crate::mobility::DriverMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn veh(lane: u8, p: f64) -> VehicleState {
        VehicleState {
            elp: Elp(0),
            lane_index: lane,
            progress_m: p,
            speed_mps: 20.0,
            desired_speed_mps: 30.0,
            mode: DriverMode::StBaseline,
            oda_budget_remaining: 0,
            pending_advice: None,
        }
    }

    fn setup() -> (CorridorConfig, StConfig, CellHistory) {
        let c = CorridorConfig::default();
        let st = StConfig::default();
        let h = CellHistory::new(&c, &st);
        (c, st, h)
    }

    #[test]
    fn needs_two_epochs() {
        let (c, st, mut h) = setup();
        assert_eq!(st_baseline_decision(&veh(1, 0.0), &h, &st, 0.1, &c), Err(StError::InsufficientHistory { epochs: 0 }));
        h.record(&[]);
        assert_eq!(st_baseline_decision(&veh(1, 0.0), &h, &st, 0.1, &c), Err(StError::InsufficientHistory { epochs: 1 }));
    }

    #[test]
    fn empty_history_stays() {
        let (c, st, mut h) = setup();
        h.record(&[]);
        h.record(&[]);
        assert_eq!(st_baseline_decision(&veh(1, 0.0), &h, &st, 0.1, &c), Ok(None));
    }

    #[test]
    fn picks_the_falling_lane() {
        let (c, st, mut h) = setup();
        let n = h.cells_per_lane();
        let snap = |l0: f64, l1: f64, l2: f64| {
            let mut d = vec![vec![0.0; n]; 6];
            for cell in 1..=4 {
                d[0][cell] = l0;
                d[1][cell] = l1;
                d[2][cell] = l2;
            }
            d
        };
        // lane 0 rising, lane 2 falling, lane 1 steady
        h.push(snap(0.02, 0.04, 0.06));
        h.push(snap(0.04, 0.04, 0.03));
        assert_eq!(st_baseline_decision(&veh(1, 10.0), &h, &st, 0.1, &c), Ok(Some(2)));
    }

    #[test]
    fn never_crosses_the_median() {
        let (c, st, mut h) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut snap = || (0..6).map(|_| (0..20).map(|_| rng.random_range(0.0..0.2)).collect()).collect::<Vec<Vec<f64>>>();
            let a = snap();
            let b = snap();
            h.push(a);
            h.push(b);
            for lane in 0..6 {
                if let Ok(Some(l)) = st_baseline_decision(&veh(lane, 500.0), &h, &st, 0.1, &c) {
                    assert_eq!(c.direction_of(l), c.direction_of(lane));
                    assert_eq!(l.abs_diff(lane), 1);
                }
            }
        }
    }

    #[test]
    fn matches_brute_force_extrapolation() {
        let (c, st, mut h) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let prev: Vec<Vec<f64>> = (0..6).map(|_| (0..20).map(|_| rng.random_range(0.0..0.1)).collect()).collect();
            let last: Vec<Vec<f64>> = (0..6).map(|_| (0..20).map(|_| rng.random_range(0.0..0.1)).collect()).collect();
            h.push(prev.clone());
            h.push(last.clone());
            let lane = rng.random_range(0..6u8);
            let p: f64 = rng.random_range(0.0..1000.0);
            let cell = (p / 50.0).floor() as usize;
            let score = |l: usize| -> f64 {
                (1..=4).map(|k| (cell + k) % 20).map(|k| (2.0 * last[l][k] - prev[l][k]).max(0.0)).sum()
            };
            let cur = score(lane as usize);
            let mut want = None;
            let mut best = f64::INFINITY;
            for l in c.adjacent_lanes(lane) {
                if score(l as usize) < best {
                    best = score(l as usize);
                    want = Some(l);
                }
            }
            let want = if cur > 0.0 && best < cur * 0.9 { want } else { None };
            assert_eq!(st_baseline_decision(&veh(lane, p), &h, &st, 0.1, &c), Ok(want));
        }
    }

    #[test]
    fn record_counts_vehicles_per_cell() {
        let (_, _, mut h) = setup();
        h.record(&[veh(0, 10.0), veh(0, 49.9), veh(0, 50.0), veh(3, 999.9)]);
        h.record(&[]);
        assert_eq!(h.snapshots[0][0], 2.0 / 50.0);
        assert_eq!(h.snapshots[0][1], 1.0 / 50.0);
        assert_eq!(h.snapshots[0][3 * 20 + 19], 1.0 / 50.0);
    }
}
