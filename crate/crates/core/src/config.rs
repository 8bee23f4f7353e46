//! Scenario configuration, read from and written to TOML.
//!
//! ```toml
//! duration_s = 300.0
//! max_vehicles = 200
//! density = "high"
//! mode = "proposed"
//! oda_budget = 50
//! seed = 7
//!
//! [channel]
//! tx_range_m = 500.0
//! ```
//!
//! Every key is optional; omitted keys take their defaults. Unknown keys are
//! rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalyticsConfig;
use crate::channel::ChannelConfig;
use crate::geometry::CorridorConfig;
use crate::mobility::{DriverConfig, DriverMode};
use crate::rsu::RsuConfig;

/// Upper bound on ODAs one vehicle may issue in a run.
pub const MAX_ODA_BUDGET: u8 = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::InvalidConfig { field: field.into(), reason: reason.into() }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::InvalidConfig { field, .. } => Some(field),
            ConfigError::Parse(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityLevel {
    Low,
    Medium,
    High,
}

impl DensityLevel {
    pub const ALL: [DensityLevel; 3] = [DensityLevel::Low, DensityLevel::Medium, DensityLevel::High];

    pub fn fraction(self) -> f64 {
        match self {
            DensityLevel::Low => 0.25,
            DensityLevel::Medium => 0.50,
            DensityLevel::High => 0.75,
        }
    }

    pub fn vehicles(self, max_vehicles: u32) -> u32 {
        (max_vehicles as f64 * self.fraction()).round() as u32
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DensityLevel::Low => "low",
            DensityLevel::Medium => "medium",
            DensityLevel::High => "high",
        }
    }
}

impl fmt::Display for DensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DensityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(DensityLevel::Low),
            "medium" => Ok(DensityLevel::Medium),
            "high" => Ok(DensityLevel::High),
            other => Err(format!("unknown density `{other}` (low, medium, high)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemMode {
    /// No assistance: every driver decides from sight.
    Off,
    /// Drivers consult the RSU before changing lanes.
    Proposed,
    /// Drivers use the simplified spatiotemporal cell predictor.
    StBaseline,
}

impl SystemMode {
    pub fn driver_mode(self) -> DriverMode {
        match self {
            SystemMode::Off => DriverMode::Baseline,
            SystemMode::Proposed => DriverMode::Assisted,
            SystemMode::StBaseline => DriverMode::StBaseline,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SystemMode::Off => "off",
            SystemMode::Proposed => "proposed",
            SystemMode::StBaseline => "st_baseline",
        }
    }
}

impl fmt::Display for SystemMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "off" => Ok(SystemMode::Off),
            "proposed" | "on" => Ok(SystemMode::Proposed),
            "st_baseline" | "st" => Ok(SystemMode::StBaseline),
            other => Err(format!("unknown mode `{other}` (off, proposed, st_baseline)")),
        }
    }
}

/// Which sensed gaps an assisted driver submits for analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdaCandidates {
    /// Only gaps the driver would move into unassisted.
    Attractive,
    /// Every gap the driver can sense.
    All,
}

/// Simplified spatiotemporal predictor settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StConfig {
    pub cell_m: f64,
    /// Downstream cells summed when comparing lanes.
    pub horizon_cells: u32,
}

impl Default for StConfig {
    fn default() -> Self {
        Self { cell_m: 50.0, horizon_cells: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    pub max_vehicles: u32,
    pub density: DensityLevel,
    /// Overrides the density-derived vehicle count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vehicle_count: Option<u32>,
    pub mode: SystemMode,
    /// ODAs each vehicle may issue over the run.
    pub oda_budget: u8,
    pub oda_candidates: OdaCandidates,
    pub seed: u64,
    pub channel: ChannelConfig,
    pub corridor: CorridorConfig,
    pub analytics: AnalyticsConfig,
    pub driver: DriverConfig,
    pub rsu: RsuConfig,
    pub st: StConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration_s: 300.0,
            max_vehicles: 200,
            density: DensityLevel::Medium,
            vehicle_count: None,
            mode: SystemMode::Proposed,
            oda_budget: MAX_ODA_BUDGET,
            oda_candidates: OdaCandidates::Attractive,
            seed: 1,
            channel: ChannelConfig::default(),
            corridor: CorridorConfig::default(),
            analytics: AnalyticsConfig::default(),
            driver: DriverConfig::default(),
            rsu: RsuConfig::default(),
            st: StConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serialises")
    }

    pub fn vehicle_count(&self) -> u32 {
        self.vehicle_count.unwrap_or_else(|| self.density.vehicles(self.max_vehicles))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ConfigError::invalid("duration_s", "must be positive"));
        }
        if self.vehicle_count() > self.max_vehicles {
            return Err(ConfigError::invalid(
                "vehicle_count",
                format!("{} exceeds max_vehicles {}", self.vehicle_count(), self.max_vehicles),
            ));
        }
        if self.oda_budget > MAX_ODA_BUDGET {
            return Err(ConfigError::invalid("oda_budget", format!("{} exceeds {MAX_ODA_BUDGET}", self.oda_budget)));
        }
        self.channel.validate().map_err(|e| match e {
            crate::channel::ChannelError::InvalidConfig { field, reason } => {
                ConfigError::invalid(format!("channel.{field}"), reason)
            }
        })?;
        self.corridor.validate().map_err(|r| ConfigError::invalid("corridor", r))?;
        self.analytics.validate().map_err(|r| ConfigError::invalid("analytics", r))?;
        self.driver.validate().map_err(|r| ConfigError::invalid("driver", r))?;
        if !(self.rsu.neighborhood_radius_m > 0.0) {
            return Err(ConfigError::invalid("rsu.neighborhood_radius_m", "must be positive"));
        }
        if !(self.st.cell_m > 0.0) || self.st.horizon_cells == 0 {
            return Err(ConfigError::invalid("st", "cell_m and horizon_cells must be positive"));
        }
        let per_lane_room = self.corridor.length_m / (self.driver.vehicle_length_m + self.driver.min_gap_m + 1.0);
        let lanes = self.corridor.lane_count as f64;
        if self.vehicle_count() as f64 > per_lane_room * lanes / 2.0 {
            return Err(ConfigError::invalid("vehicle_count", "too many vehicles to place on the corridor"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_maps_to_vehicle_counts() {
        assert_eq!(DensityLevel::Low.vehicles(200), 50);
        assert_eq!(DensityLevel::Medium.vehicles(200), 100);
        assert_eq!(DensityLevel::High.vehicles(200), 150);
    }

    #[test]
    fn empty_toml_is_default() {
        assert_eq!(ScenarioConfig::from_toml_str("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig {
            vehicle_count: Some(12),
            mode: SystemMode::StBaseline,
            seed: 99,
            ..ScenarioConfig::default()
        };
        assert_eq!(ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn invalid_fields_are_named() {
        let err = ScenarioConfig::from_toml_str("oda_budget = 51").unwrap_err();
        assert_eq!(err.field(), Some("oda_budget"));
        let err = ScenarioConfig::from_toml_str("[channel]\ntx_range_m = 400.0").unwrap_err();
        assert_eq!(err.field(), Some("channel.tx_range_m"));
        let err = ScenarioConfig::from_toml_str("vehicle_count = 201").unwrap_err();
        assert_eq!(err.field(), Some("vehicle_count"));
        assert!(matches!(ScenarioConfig::from_toml_str("bogus = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn modes_parse() {
        assert_eq!("st-baseline".parse::<SystemMode>(), Ok(SystemMode::StBaseline));
        assert_eq!("HIGH".parse::<DensityLevel>(), Ok(DensityLevel::High));
        assert!("fast".parse::<SystemMode>().is_err());
    }
}
