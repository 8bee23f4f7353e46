//! Abstracted DSRC channel: range gating, TDMA slot collisions and
//! Nakagami-m fading.
//!
//! Mean received power follows a power law `(R/d)^alpha` normalised to one at
//! the transmission range `R`. The instantaneous power gain of a Nakagami-m
//! channel is Gamma distributed with shape `m` and unit mean. A frame is
//! received when `gain * (R/d)^alpha` reaches a threshold chosen so that the
//! delivery probability at exactly `R` is one half. The resulting delivery
//! probability is the regularized upper incomplete gamma function
//! `Q(m, m * threshold * (d/R)^alpha)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::codec::Elp;
use crate::geometry::Point;

pub const ALLOWED_TX_RANGES_M: [f64; 2] = [300.0, 500.0];
pub const ALLOWED_DATA_RATES_MBPS: [u32; 4] = [6, 12, 18, 27];
pub const SAFETY_PAYLOAD_BYTES: usize = 100;
pub const NON_SAFETY_PAYLOAD_BYTES: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel config `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub tx_range_m: f64,
    pub slots_per_frame: u16,
    pub slot_ms: f64,
    pub nakagami_m: f64,
    pub path_loss_exponent: f64,
    pub data_rate_mbps: u32,
    /// Transmit power reported in beacons.
    pub tx_power_dbm: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            tx_range_m: 300.0,
            slots_per_frame: 10,
            slot_ms: 2.5,
            nakagami_m: 3.0,
            path_loss_exponent: 2.5,
            data_rate_mbps: 6,
            tx_power_dbm: 20.0,
        }
    }
}

impl ChannelConfig {
    pub fn frame_ms(&self) -> f64 {
        self.slots_per_frame as f64 * self.slot_ms
    }

    pub fn airtime_ms(&self, payload_bytes: usize) -> f64 {
        payload_bytes as f64 * 8.0 / (self.data_rate_mbps as f64 * 1_000.0)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |field, reason: String| Err(ChannelError::InvalidConfig { field, reason });
        if !ALLOWED_TX_RANGES_M.contains(&self.tx_range_m) {
            return bad("tx_range_m", format!("{} not one of {ALLOWED_TX_RANGES_M:?}", self.tx_range_m));
        }
        if self.slots_per_frame == 0 {
            return bad("slots_per_frame", "must be at least 1".into());
        }
        if !(self.slot_ms > 0.0) {
            return bad("slot_ms", "must be positive".into());
        }
        if !(self.nakagami_m >= 0.5) {
            return bad("nakagami_m", format!("{} below 0.5", self.nakagami_m));
        }
        if !(self.path_loss_exponent > 0.0) {
            return bad("path_loss_exponent", "must be positive".into());
        }
        if !ALLOWED_DATA_RATES_MBPS.contains(&self.data_rate_mbps) {
            return bad("data_rate_mbps", format!("{} not one of {ALLOWED_DATA_RATES_MBPS:?}", self.data_rate_mbps));
        }
        if self.airtime_ms(NON_SAFETY_PAYLOAD_BYTES) > self.slot_ms {
            return bad("slot_ms", "a non-safety message does not fit one slot".into());
        }
        Ok(())
    }
}

/// A validated channel with its reception threshold precomputed.
#[derive(Debug, Clone)]
pub struct Channel {
    cfg: ChannelConfig,
    /// Reception threshold relative to the mean power at `tx_range_m`.
    threshold: f64,
    fading: Gamma<f64>,
}

impl Channel {
    pub fn new(cfg: ChannelConfig) -> Result<Self, ChannelError> {
        cfg.validate()?;
        let m = cfg.nakagami_m;
        // median of Gamma(shape m, mean 1)
        let threshold = GammaDist::new(m, m)
            .map_err(|e| ChannelError::InvalidConfig { field: "nakagami_m", reason: e.to_string() })?
            .inverse_cdf(0.5);
        let fading = Gamma::new(m, 1.0 / m)
            .map_err(|e| ChannelError::InvalidConfig { field: "nakagami_m", reason: e.to_string() })?;
        Ok(Self { cfg, threshold, fading })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Gain the fading draw must reach for a frame sent over `distance_m` to be received.
    fn required_gain(&self, distance_m: f64) -> f64 {
        self.threshold * (distance_m / self.cfg.tx_range_m).powf(self.cfg.path_loss_exponent)
    }

    /// Closed-form probability that a single uncollided frame is received.
    pub fn delivery_probability(&self, distance_m: f64) -> f64 {
        if distance_m > self.cfg.tx_range_m {
            return 0.0;
        }
        if distance_m <= 0.0 {
            return 1.0;
        }
        let m = self.cfg.nakagami_m;
        gamma_ur(m, m * self.required_gain(distance_m))
    }

    /// One fading draw for a frame over `distance_m`.
    pub fn sample_delivery<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> bool {
        if distance_m > self.cfg.tx_range_m {
            return false;
        }
        self.fading.sample(rng) >= self.required_gain(distance_m)
    }

    /// Mean received power in dBm at `distance_m` (free-space-like log-distance law).
    pub fn mean_rx_power_dbm(&self, distance_m: f64) -> f64 {
        // 1 m reference loss of 47 dB (5.9 GHz free space)
        let d = distance_m.max(1.0);
        self.cfg.tx_power_dbm - 47.0 - 10.0 * self.cfg.path_loss_exponent * d.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxEvent {
    pub sender: Elp,
    pub slot_index: u16,
    pub frame_index: u64,
    pub payload_bytes: usize,
    pub sender_pos: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery<K> {
    pub receiver: K,
    pub event: TxEvent,
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pseudo-random but reproducible TDMA slot for a sender in a given frame.
pub fn assign_slot(elp: Elp, frame_index: u64, cfg: &ChannelConfig) -> u16 {
    let h = mix64(elp.0 ^ mix64(frame_index));
    (h % cfg.slots_per_frame as u64) as u16
}

/// Which of every `period` frames a sender uses; fixed per sender.
pub fn frame_phase(elp: Elp, period: u64) -> u64 {
    mix64(elp.0.rotate_left(17) ^ 0xA5A5_5A5A_0F0F_F0F0) % period.max(1)
}

/// Resolves one TDMA frame at every receiver.
///
/// Per receiver an event is dropped when out of range, when another in-range
/// event shares its slot, and otherwise survives a fading draw. Receivers are
/// processed in order and events within a receiver in order, so the output is
/// a pure function of the inputs and the rng state.
pub fn resolve_frame<K: Copy, R: Rng + ?Sized>(
    events: &[TxEvent],
    receivers: &[(K, Point)],
    channel: &Channel,
    rng: &mut R,
) -> Vec<Delivery<K>> {
    let mut out = Vec::new();
    if events.is_empty() {
        return out;
    }
    let range = channel.config().tx_range_m;
    let mut per_slot = vec![0u32; channel.config().slots_per_frame as usize];
    for &(receiver, rx_pos) in receivers {
        per_slot.iter_mut().for_each(|c| *c = 0);
        let in_range: Vec<(&TxEvent, f64)> = events
            .iter()
            .map(|e| (e, e.sender_pos.distance(&rx_pos)))
            .filter(|&(_, d)| d <= range)
            .collect();
        for (e, _) in &in_range {
            per_slot[e.slot_index as usize] += 1;
        }
        for (e, d) in in_range {
            if per_slot[e.slot_index as usize] > 1 {
                continue;
            }
            if channel.sample_delivery(d, rng) {
                out.push(Delivery { receiver, event: *e });
            }
        }
    }
    out
}

/// Closest station within transmission range; ties go to the lower id.
pub fn nearest_rsu<K: Copy + Ord>(pos: &Point, rsus: &[(K, Point)], cfg: &ChannelConfig) -> Option<K> {
    rsus.iter()
        .map(|&(id, p)| (id, pos.distance(&p)))
        .filter(|&(_, d)| d <= cfg.tx_range_m)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(id, _)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn channel() -> Channel {
        Channel::new(ChannelConfig::default()).unwrap()
    }

    fn tx(sender: u64, slot: u16, x: f64) -> TxEvent {
        TxEvent { sender: Elp(sender), slot_index: slot, frame_index: 0, payload_bytes: 100, sender_pos: Point::new(x, 0.0) }
    }

    #[test]
    fn slot_assignment_is_deterministic() {
        let cfg = ChannelConfig::default();
        assert_eq!(assign_slot(Elp(42), 7, &cfg), assign_slot(Elp(42), 7, &cfg));
        let one = ChannelConfig { slots_per_frame: 1, ..cfg };
        assert!((0..100).all(|f| assign_slot(Elp(f * 31), f, &one) == 0));
    }

    #[test]
    fn half_delivery_at_range_edge() {
        let c = channel();
        assert!((c.delivery_probability(300.0) - 0.5).abs() < 1e-9);
        assert_eq!(c.delivery_probability(300.01), 0.0);
        assert_eq!(c.delivery_probability(0.0), 1.0);
        assert!(c.delivery_probability(10.0) > 0.999);
    }

    #[test]
    fn delivery_probability_non_increasing() {
        let c = channel();
        let mut last = 1.0;
        for i in 0..=600 {
            let p = c.delivery_probability(i as f64 * 0.5);
            assert!(p <= last + 1e-15, "p({}) = {p} > {last}", i as f64 * 0.5);
            last = p;
        }
    }

    #[test]
    fn near_sender_is_delivered() {
        let c = Channel::new(ChannelConfig { nakagami_m: 50.0, ..Default::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = resolve_frame(&[tx(1, 0, 10.0)], &[(0u32, Point::new(0.0, 0.0))], &c, &mut rng);
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn same_slot_collides() {
        let c = channel();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let events = [tx(1, 3, 10.0), tx(2, 3, -10.0)];
        assert!(resolve_frame(&events, &[(0u32, Point::default())], &c, &mut rng).is_empty());
        // one of the pair is out of range of this receiver, so no collision there
        let far = [tx(1, 3, 10.0), tx(2, 3, 900.0)];
        let c50 = Channel::new(ChannelConfig { nakagami_m: 50.0, ..Default::default() }).unwrap();
        let got = resolve_frame(&far, &[(0u32, Point::default())], &c50, &mut rng);
        assert_eq!(got.iter().map(|d| d.event.sender).collect::<Vec<_>>(), vec![Elp(1)]);
    }

    #[test]
    fn never_delivers_beyond_range_and_empty_is_empty() {
        let c = channel();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let events: Vec<_> = (0..10).map(|i| tx(i, i as u16, 300.5 + i as f64)).collect();
        assert!(resolve_frame(&events, &[(0u32, Point::default())], &c, &mut rng).is_empty());
        assert!(resolve_frame::<u32, _>(&[], &[(0, Point::default())], &c, &mut rng).is_empty());
    }

    #[test]
    fn resolve_frame_reproducible() {
        let c = channel();
        let events: Vec<_> = (0..30).map(|i| tx(i, (i % 10) as u16, i as f64 * 9.0)).collect();
        let rx = [(0u32, Point::new(50.0, 0.0)), (1u32, Point::new(250.0, 0.0))];
        let a = resolve_frame(&events, &rx, &c, &mut ChaCha8Rng::seed_from_u64(3));
        let b = resolve_frame(&events, &rx, &c, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn nearest_rsu_examples() {
        let cfg = ChannelConfig::default();
        let origin = Point::default();
        assert_eq!(nearest_rsu::<u32>(&origin, &[(0, Point::new(400.0, 0.0))], &cfg), None);
        assert_eq!(nearest_rsu(&origin, &[(7u32, Point::new(100.0, 0.0))], &cfg), Some(7));
        let tie = [(3u32, Point::new(100.0, 0.0)), (1u32, Point::new(-100.0, 0.0))];
        assert_eq!(nearest_rsu(&origin, &tie, &cfg), Some(1));
    }

    #[test]
    fn config_validation() {
        let ok = ChannelConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ChannelConfig { tx_range_m: 250.0, ..ok }.validate().is_err());
        assert!(ChannelConfig { slots_per_frame: 0, ..ok }.validate().is_err());
        assert!(ChannelConfig { nakagami_m: 0.4, ..ok }.validate().is_err());
        assert!(ChannelConfig { data_rate_mbps: 7, ..ok }.validate().is_err());
        assert!((ok.frame_ms() - 25.0).abs() < 1e-12);
        assert!(ok.airtime_ms(100) < 0.14);
    }
}
