//! Speed and driver-behaviour analytics evaluated by roadside units.
//!
//! * ACS: time average of one vehicle's recent beacon speeds.
//! * AAVS: mean of the ACS values of a set of vehicles.
//! * AvSud: sudden brakes plus sudden high-speed lane changes, each
//!   normalised by the number of observed intervals.
//!
//! A candidate gap is then classified by [`decide`] from whether the decider
//! is faster than the traffic around the gap and whether that traffic behaves
//! erratically.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Elp;

/// Upper speed bound for any vehicle on the corridor.
pub const MAX_SPEED_MPS: f64 = 45.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("speed window is empty")]
    EmptyWindow,
    #[error("fleet snapshot is empty")]
    EmptyFleet,
    #[error("trajectory needs at least two points")]
    TooShort,
    #[error("no observation intervals")]
    ZeroObservations,
    #[error("timestamp {got} ms does not follow {last} ms")]
    NonMonotonicTimestamp { last: u64, got: u64 },
    #[error("speed {0} m/s outside [0, {MAX_SPEED_MPS}]")]
    SpeedOutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedSample {
    pub timestamp_ms: u64,
    pub speed_mps: f64,
}

/// Bounded, time-ordered history of one vehicle's speed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedWindow {
    samples: VecDeque<SpeedSample>,
    capacity: usize,
    max_age_ms: u64,
}

impl Default for SpeedWindow {
    fn default() -> Self {
        Self::new(20, 5_000)
    }
}

impl SpeedWindow {
    pub fn new(capacity: usize, max_age_ms: u64) -> Self {
        Self { samples: VecDeque::with_capacity(capacity), capacity: capacity.max(1), max_age_ms }
    }

    pub fn push(&mut self, timestamp_ms: u64, speed_mps: f64) -> Result<(), AnalyticsError> {
        if !(0.0..=MAX_SPEED_MPS).contains(&speed_mps) {
            return Err(AnalyticsError::SpeedOutOfRange(speed_mps));
        }
        if let Some(last) = self.samples.back() {
            if timestamp_ms <= last.timestamp_ms {
                return Err(AnalyticsError::NonMonotonicTimestamp { last: last.timestamp_ms, got: timestamp_ms });
            }
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(SpeedSample { timestamp_ms, speed_mps });
        Ok(())
    }

    /// Drops samples older than the window's maximum age relative to `now_ms`.
    pub fn evict_stale(&mut self, now_ms: u64) {
        while let Some(first) = self.samples.front() {
            if now_ms.saturating_sub(first.timestamp_ms) > self.max_age_ms {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &SpeedSample> {
        self.samples.iter()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

pub fn compute_acs(w: &SpeedWindow) -> Result<f64, AnalyticsError> {
    if w.is_empty() {
        return Err(AnalyticsError::EmptyWindow);
    }
    Ok(w.samples().map(|s| s.speed_mps).sum::<f64>() / w.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetEntry {
    pub elp: Elp,
    pub acs_mps: f64,
    /// Behaviour score of this vehicle, when it has at least one observed interval.
    pub avsud: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FleetSnapshot {
    pub entries: Vec<FleetEntry>,
}

impl FleetSnapshot {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    /// Mean AvSud of the members that have one; zero when none do.
    pub fn mean_avsud(&self) -> f64 {
        let (sum, count) = self
            .entries
            .iter()
            .filter_map(|e| e.avsud)
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

pub fn compute_aavs(f: &FleetSnapshot) -> Result<f64, AnalyticsError> {
    if f.entries.is_empty() {
        return Err(AnalyticsError::EmptyFleet);
    }
    Ok(f.entries.iter().map(|e| e.acs_mps).sum::<f64>() / f.n() as f64)
}

/// True iff the decider is strictly faster than the surrounding average.
pub fn analyse_speed(acs_mps: f64, aavs_mps: f64) -> bool {
    acs_mps > aavs_mps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuddenEventConfig {
    /// Deceleration at or above this counts as a sudden brake.
    pub brake_decel_mps2: f64,
    /// Events only count while the vehicle is faster than this.
    pub high_speed_mps: f64,
}

impl Default for SuddenEventConfig {
    fn default() -> Self {
        Self { brake_decel_mps2: 4.0, high_speed_mps: 25.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub timestamp_ms: u64,
    pub speed_mps: f64,
    pub lane: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SuddenEventCounts {
    pub sud_brk: u32,
    pub chg_loc: u32,
    pub n: u32,
}

impl SuddenEventCounts {
    /// Accounts for the interval between two consecutive observations.
    /// The speed gate is evaluated at the start of the interval.
    pub fn record_interval(&mut self, prev: &TrajectoryPoint, cur: &TrajectoryPoint, cfg: &SuddenEventConfig) {
        self.n += 1;
        if prev.speed_mps <= cfg.high_speed_mps {
            return;
        }
        let dt_s = cur.timestamp_ms.saturating_sub(prev.timestamp_ms) as f64 / 1000.0;
        if dt_s > 0.0 && (prev.speed_mps - cur.speed_mps) / dt_s >= cfg.brake_decel_mps2 {
            self.sud_brk += 1;
        }
        if prev.lane != cur.lane {
            self.chg_loc += 1;
        }
    }
}

pub fn detect_sudden_events(
    traj: &[TrajectoryPoint],
    cfg: &SuddenEventConfig,
) -> Result<SuddenEventCounts, AnalyticsError> {
    if traj.len() < 2 {
        return Err(AnalyticsError::TooShort);
    }
    let mut counts = SuddenEventCounts::default();
    for pair in traj.windows(2) {
        if pair[1].timestamp_ms <= pair[0].timestamp_ms {
            return Err(AnalyticsError::NonMonotonicTimestamp {
                last: pair[0].timestamp_ms,
                got: pair[1].timestamp_ms,
            });
        }
        counts.record_interval(&pair[0], &pair[1], cfg);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AvSudClass {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvSudScore {
    pub value: f64,
    pub class: AvSudClass,
}

pub fn classify_avsud(value: f64, threshold: f64) -> AvSudClass {
    if value >= threshold {
        AvSudClass::High
    } else {
        AvSudClass::Low
    }
}

pub fn compute_avsud(c: &SuddenEventCounts, threshold: f64) -> Result<AvSudScore, AnalyticsError> {
    if c.n == 0 {
        return Err(AnalyticsError::ZeroObservations);
    }
    // one rounding, so ratios that land exactly on the threshold stay on it
    let value = (c.sud_brk as f64 + c.chg_loc as f64) / c.n as f64;
    Ok(AvSudScore { value, class: classify_avsud(value, threshold) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Decision {
    NotPreferred,
    NotPreferredDanger,
    Preferred,
}

impl Decision {
    /// Ranking position: lower sorts first.
    fn rank(self) -> u8 {
        match self {
            Decision::Preferred => 0,
            Decision::NotPreferred => 1,
            Decision::NotPreferredDanger => 2,
        }
    }
}

/// The four-row traffic prediction table.
pub fn decide(faster: bool, avsud_class: AvSudClass) -> Decision {
    match (faster, avsud_class) {
        (false, AvSudClass::High) => Decision::NotPreferred,
        (false, AvSudClass::Low) => Decision::NotPreferred,
        (true, AvSudClass::High) => Decision::NotPreferredDanger,
        (true, AvSudClass::Low) => Decision::Preferred,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceVerdict {
    pub choice_id: u16,
    pub lane_index: u8,
    pub decision: Decision,
    /// Absent when nobody was around the gap.
    pub aavs_mps: Option<f64>,
    pub avsud_class: AvSudClass,
}

/// Orders verdicts best first: by decision, then fewest lane crossings from
/// `decider_lane`, then lowest choice id.
pub fn rank_choices(mut verdicts: Vec<ChoiceVerdict>, decider_lane: u8) -> Vec<ChoiceVerdict> {
    verdicts.sort_by_key(|v| (v.decision.rank(), v.lane_index.abs_diff(decider_lane), v.choice_id));
    verdicts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    pub avsud_threshold: f64,
    pub brake_decel_mps2: f64,
    pub high_speed_mps: f64,
    pub window_samples: usize,
    pub window_max_age_ms: u64,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        let sudden = SuddenEventConfig::default();
        Self {
            avsud_threshold: 0.1,
            brake_decel_mps2: sudden.brake_decel_mps2,
            high_speed_mps: sudden.high_speed_mps,
            window_samples: 20,
            window_max_age_ms: 5_000,
        }
    }
}

impl AnalyticsConfig {
    pub fn sudden(&self) -> SuddenEventConfig {
        SuddenEventConfig { brake_decel_mps2: self.brake_decel_mps2, high_speed_mps: self.high_speed_mps }
    }

    pub fn new_window(&self) -> SpeedWindow {
        SpeedWindow::new(self.window_samples, self.window_max_age_ms)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.avsud_threshold >= 0.0) {
            return Err("avsud_threshold must be non-negative".into());
        }
        if !(self.brake_decel_mps2 > 0.0) {
            return Err("brake_decel_mps2 must be positive".into());
        }
        if !(self.high_speed_mps >= 0.0) {
            return Err("high_speed_mps must be non-negative".into());
        }
        if self.window_samples == 0 {
            return Err("window_samples must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window(speeds: &[f64]) -> SpeedWindow {
        let mut w = SpeedWindow::new(speeds.len().max(1), u64::MAX);
        for (i, &s) in speeds.iter().enumerate() {
            w.push(i as u64 * 100, s).unwrap();
        }
        w
    }

    fn pt(t: u64, v: f64, lane: u8) -> TrajectoryPoint {
        TrajectoryPoint { timestamp_ms: t, speed_mps: v, lane }
    }

    #[test]
    fn acs_examples() {
        assert_eq!(compute_acs(&window(&[20.0; 20])).unwrap(), 20.0);
        assert_eq!(compute_acs(&window(&[10.0, 20.0, 30.0])).unwrap(), 20.0);
        assert_eq!(compute_acs(&SpeedWindow::default()), Err(AnalyticsError::EmptyWindow));
    }

    #[test]
    fn window_capacity_and_staleness() {
        let mut w = SpeedWindow::new(3, 1_000);
        for t in 0..5u64 {
            w.push(t * 100, t as f64).unwrap();
        }
        assert_eq!(w.len(), 3);
        assert_eq!(w.samples().next().unwrap().timestamp_ms, 200);
        w.evict_stale(1_250);
        assert_eq!(w.len(), 2);
        w.evict_stale(10_000);
        assert!(w.is_empty());
    }

    #[test]
    fn window_rejects_bad_samples() {
        let mut w = SpeedWindow::default();
        w.push(100, 10.0).unwrap();
        assert!(matches!(w.push(100, 10.0), Err(AnalyticsError::NonMonotonicTimestamp { .. })));
        assert!(matches!(w.push(200, 46.0), Err(AnalyticsError::SpeedOutOfRange(_))));
        assert!(matches!(w.push(200, -1.0), Err(AnalyticsError::SpeedOutOfRange(_))));
    }

    #[test]
    fn aavs_examples() {
        let snap = |v: &[f64]| FleetSnapshot {
            entries: v.iter().enumerate().map(|(i, &a)| FleetEntry { elp: Elp(i as u64), acs_mps: a, avsud: None }).collect(),
        };
        assert_eq!(compute_aavs(&snap(&[25.0])).unwrap(), 25.0);
        assert_eq!(compute_aavs(&snap(&[15.0, 45.0])).unwrap(), 30.0);
        assert_eq!(compute_aavs(&snap(&[])), Err(AnalyticsError::EmptyFleet));
        assert_eq!(snap(&[1.0]).mean_avsud(), 0.0);
    }

    #[test]
    fn speed_comparison_is_strict() {
        assert!(analyse_speed(25.0, 20.0));
        assert!(!analyse_speed(20.0, 20.0));
        assert!(!analyse_speed(15.0, 20.0));
    }

    #[test]
    fn sudden_events_examples() {
        let cfg = SuddenEventConfig::default();
        let flat: Vec<_> = (0..10).map(|i| pt(i * 100, 30.0, 1)).collect();
        assert_eq!(detect_sudden_events(&flat, &cfg).unwrap(), SuddenEventCounts { sud_brk: 0, chg_loc: 0, n: 9 });

        // 30 -> 25 m/s in one second is a 5 m/s^2 deceleration.
        let brake = [pt(0, 30.0, 1), pt(1_000, 25.0, 1)];
        assert_eq!(detect_sudden_events(&brake, &cfg).unwrap().sud_brk, 1);

        let slow_change = [pt(0, 10.0, 1), pt(100, 10.0, 2)];
        assert_eq!(detect_sudden_events(&slow_change, &cfg).unwrap().chg_loc, 0);
        let fast_change = [pt(0, 30.0, 1), pt(100, 30.0, 2)];
        assert_eq!(detect_sudden_events(&fast_change, &cfg).unwrap().chg_loc, 1);

        assert_eq!(detect_sudden_events(&brake[..1], &cfg), Err(AnalyticsError::TooShort));
        assert!(detect_sudden_events(&[pt(5, 1.0, 0), pt(5, 1.0, 0)], &cfg).is_err());
    }

    #[test]
    fn avsud_examples() {
        let s = compute_avsud(&SuddenEventCounts { sud_brk: 0, chg_loc: 0, n: 10 }, 0.1).unwrap();
        assert_eq!((s.value, s.class), (0.0, AvSudClass::Low));
        let s = compute_avsud(&SuddenEventCounts { sud_brk: 2, chg_loc: 3, n: 10 }, 0.1).unwrap();
        assert_eq!((s.value, s.class), (0.5, AvSudClass::High));
        let s = compute_avsud(&SuddenEventCounts { sud_brk: 1, chg_loc: 0, n: 10 }, 0.1).unwrap();
        assert_eq!(s.class, AvSudClass::High, "threshold is inclusive");
        assert_eq!(
            compute_avsud(&SuddenEventCounts { sud_brk: 0, chg_loc: 0, n: 0 }, 0.1),
            Err(AnalyticsError::ZeroObservations)
        );
    }

    #[test]
    fn decision_table_rows() {
        assert_eq!(decide(false, AvSudClass::High), Decision::NotPreferred);
        assert_eq!(decide(false, AvSudClass::Low), Decision::NotPreferred);
        assert_eq!(decide(true, AvSudClass::High), Decision::NotPreferredDanger);
        assert_eq!(decide(true, AvSudClass::Low), Decision::Preferred);
    }

    fn verdict(id: u16, lane: u8, decision: Decision) -> ChoiceVerdict {
        ChoiceVerdict { choice_id: id, lane_index: lane, decision, aavs_mps: None, avsud_class: AvSudClass::Low }
    }

    #[test]
    fn ranking_examples() {
        let out = rank_choices(vec![verdict(0, 0, Decision::NotPreferred), verdict(1, 2, Decision::Preferred)], 1);
        assert_eq!(out.iter().map(|v| v.choice_id).collect::<Vec<_>>(), vec![1, 0]);

        let out = rank_choices(vec![verdict(0, 4, Decision::Preferred), verdict(1, 2, Decision::Preferred)], 1);
        assert_eq!(out[0].lane_index, 2, "nearer lane first");
    }

    fn arb_verdict() -> impl Strategy<Value = ChoiceVerdict> {
        (0u16..20, 0u8..6, prop_oneof![
            Just(Decision::Preferred),
            Just(Decision::NotPreferred),
            Just(Decision::NotPreferredDanger)
        ])
            .prop_map(|(id, lane, d)| verdict(id, lane, d))
    }

    proptest! {
        #[test]
        fn avsud_scale_consistent(b in 0u32..50, c in 0u32..50, extra in 0u32..50) {
            let n = b.max(c) + extra + 1;
            let one = compute_avsud(&SuddenEventCounts { sud_brk: b, chg_loc: c, n }, 0.1).unwrap();
            let two = compute_avsud(&SuddenEventCounts { sud_brk: 2 * b, chg_loc: 2 * c, n: 2 * n }, 0.1).unwrap();
            prop_assert!((one.value - two.value).abs() <= 1e-15);
            prop_assert_eq!(one.class, two.class);
        }

        #[test]
        fn equal_speeds_are_never_faster(x in 0.0f64..45.0) {
            prop_assert!(!analyse_speed(x, x));
        }

        #[test]
        fn danger_never_precedes_preferred(vs in proptest::collection::vec(arb_verdict(), 1..10), lane in 0u8..6) {
            let ranked = rank_choices(vs.clone(), lane);
            prop_assert_eq!(ranked.len(), vs.len());
            let first_danger = ranked.iter().position(|v| v.decision == Decision::NotPreferredDanger);
            let last_pref = ranked.iter().rposition(|v| v.decision == Decision::Preferred);
            if let (Some(d), Some(p)) = (first_danger, last_pref) {
                prop_assert!(p < d);
            }
        }

        #[test]
        fn extra_hard_brake_never_lowers_count(
            speeds in proptest::collection::vec(0.0f64..45.0, 2..30),
            at in 0usize..29,
        ) {
            let cfg = SuddenEventConfig::default();
            let traj: Vec<_> = speeds.iter().enumerate().map(|(i, &v)| pt(i as u64 * 100, v, 0)).collect();
            let base = detect_sudden_events(&traj, &cfg).unwrap();
            // splice in a 40 -> 30 m/s step over 100 ms right after position `at`
            let at = at.min(traj.len() - 1);
            let mut spliced: Vec<_> = traj[..=at].to_vec();
            let t0 = spliced.last().unwrap().timestamp_ms;
            spliced.push(pt(t0 + 10, 40.0, 0));
            spliced.push(pt(t0 + 20, 30.0, 0));
            for p in &traj[at + 1..] {
                spliced.push(pt(p.timestamp_ms + 20, p.speed_mps, p.lane));
            }
            let more = detect_sudden_events(&spliced, &cfg).unwrap();
            prop_assert!(more.sud_brk >= base.sud_brk);
        }
    }
}
