//! Corridor geometry shared by the mobility model, the channel and the RSUs.
//!
//! The corridor runs along the x axis of a square grid. Lanes are stacked
//! along y starting at `origin_y_m`; the lower half of the lanes carries
//! eastbound traffic (increasing x), the upper half westbound.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Eastbound,
    Westbound,
}

impl Direction {
    /// Heading in centidegrees, east = 0, counter-clockwise.
    pub fn heading_cdeg(self) -> u16 {
        match self {
            Direction::Eastbound => 0,
            Direction::Westbound => 18_000,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Eastbound => 1.0,
            Direction::Westbound => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorConfig {
    pub length_m: f64,
    pub lane_count: u8,
    pub lane_width_m: f64,
    /// How far ahead (and behind) an unassisted driver can see.
    pub visual_range_m: f64,
    /// y coordinate of the southern road edge.
    pub origin_y_m: f64,
}

impl Default for CorridorConfig {
    fn default() -> Self {
        Self {
            length_m: 1000.0,
            lane_count: 6,
            lane_width_m: 3.5,
            visual_range_m: 60.0,
            origin_y_m: 489.5,
        }
    }
}

impl CorridorConfig {
    pub fn lanes_per_direction(&self) -> u8 {
        self.lane_count / 2
    }

    pub fn direction_of(&self, lane: u8) -> Direction {
        if lane < self.lanes_per_direction() {
            Direction::Eastbound
        } else {
            Direction::Westbound
        }
    }

    pub fn lanes_in(&self, direction: Direction) -> std::ops::Range<u8> {
        let half = self.lanes_per_direction();
        match direction {
            Direction::Eastbound => 0..half,
            Direction::Westbound => half..self.lane_count,
        }
    }

    pub fn is_valid_lane(&self, lane: u8) -> bool {
        lane < self.lane_count
    }

    /// Lanes adjacent to `lane` that carry the same direction of travel.
    pub fn adjacent_lanes(&self, lane: u8) -> impl Iterator<Item = u8> + '_ {
        let dir = self.direction_of(lane);
        [lane.checked_sub(1), lane.checked_add(1)]
            .into_iter()
            .flatten()
            .filter(move |&l| self.is_valid_lane(l) && self.direction_of(l) == dir)
    }

    pub fn lane_center_y(&self, lane: u8) -> f64 {
        self.origin_y_m + (lane as f64 + 0.5) * self.lane_width_m
    }

    pub fn median_y(&self) -> f64 {
        self.origin_y_m + self.lane_count as f64 * self.lane_width_m / 2.0
    }

    /// Lane containing lateral coordinate `y`, if it lies on the road.
    pub fn lane_at(&self, y: f64) -> Option<u8> {
        let offset = (y - self.origin_y_m) / self.lane_width_m;
        if !(0.0..self.lane_count as f64).contains(&offset) {
            return None;
        }
        Some(offset.floor() as u8)
    }

    /// Distance travelled along the direction of travel for corridor coordinate `x`.
    pub fn progress_of(&self, direction: Direction, x: f64) -> f64 {
        match direction {
            Direction::Eastbound => x,
            Direction::Westbound => self.length_m - x,
        }
    }

    /// Inverse of [`progress_of`](Self::progress_of).
    pub fn x_of(&self, direction: Direction, progress: f64) -> f64 {
        match direction {
            Direction::Eastbound => progress,
            Direction::Westbound => self.length_m - progress,
        }
    }

    /// Forward distance from progress `from` to progress `to` on the recycled corridor.
    pub fn ahead_distance(&self, from: f64, to: f64) -> f64 {
        (to - from).rem_euclid(self.length_m)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.length_m > 0.0) {
            return Err("length_m must be positive".into());
        }
        if self.lane_count == 0 || self.lane_count % 2 != 0 {
            return Err("lane_count must be even and nonzero".into());
        }
        if !(self.lane_width_m > 0.0) {
            return Err("lane_width_m must be positive".into());
        }
        if !(self.visual_range_m > 0.0) {
            return Err("visual_range_m must be positive".into());
        }
        Ok(())
    }
}
