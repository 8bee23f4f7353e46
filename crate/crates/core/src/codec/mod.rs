//! Beacon wire format.
//!
//! Every vehicle broadcasts a fixed 100-byte status message. All integers are
//! big-endian (network byte order) and laid out back to back:
//!
//! | offset | width | field          | unit                         |
//! |--------|-------|----------------|------------------------------|
//! | 0      | 4     | `seq`          | sequence number              |
//! | 4      | 2     | `interval_ms`  | ms, 100..=500                |
//! | 6      | 8     | `timestamp_ms` | ms since run start           |
//! | 14     | 8     | `elp`          | electronic license plate     |
//! | 22     | 4     | `pos_x_cm`     | cm, signed                   |
//! | 26     | 4     | `pos_y_cm`     | cm, signed                   |
//! | 30     | 2     | `speed_cms`    | cm/s, signed along x         |
//! | 32     | 2     | `dir_cdeg`     | centidegrees, < 36000        |
//! | 34     | 2     | `max_p_cdbm`   | centi-dBm, signed            |
//! | 36     | 2     | `min_p_cdbm`   | centi-dBm, signed            |
//! | 38     | 2     | `pow_u_cdbm`   | centi-dBm, signed            |
//! | 40     | 60    | piggyback      | opaque, zero padded          |
//!
//! The 512-byte non-safety message shares the 40-byte header and carries a
//! 472-byte piggyback region; see [`oda`] for the payload used by on-demand
//! analysis exchanges.

pub mod oda;

use std::fmt;

use thiserror::Error;

pub const BEACON_LEN: usize = 100;
pub const NON_SAFETY_LEN: usize = 512;
pub const HEADER_LEN: usize = 40;
pub const PIGGYBACK_LEN: usize = BEACON_LEN - HEADER_LEN;
pub const NON_SAFETY_PIGGYBACK_LEN: usize = NON_SAFETY_LEN - HEADER_LEN;

pub const MIN_INTERVAL_MS: u16 = 100;
pub const MAX_INTERVAL_MS: u16 = 500;
pub const FULL_CIRCLE_CDEG: u16 = 36_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("malformed message: {0}")]
    MalformedBeacon(String),
}

/// Electronic license plate: the stable identity a vehicle beacons under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Elp(pub u64);

impl fmt::Display for Elp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The fixed fields shared by safety beacons and non-safety messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BeaconHeader {
    pub seq: u32,
    pub interval_ms: u16,
    pub timestamp_ms: u64,
    pub elp: Elp,
    pub pos_x_cm: i32,
    pub pos_y_cm: i32,
    pub speed_cms: i16,
    pub dir_cdeg: u16,
    pub max_p_cdbm: i16,
    pub min_p_cdbm: i16,
    pub pow_u_cdbm: i16,
}

impl BeaconHeader {
    pub fn validate(&self) -> Result<(), CodecError> {
        if !(MIN_INTERVAL_MS..=MAX_INTERVAL_MS).contains(&self.interval_ms) {
            return Err(CodecError::InvalidField {
                field: "interval_ms",
                reason: format!("{} outside [{MIN_INTERVAL_MS}, {MAX_INTERVAL_MS}]", self.interval_ms),
            });
        }
        if self.dir_cdeg >= FULL_CIRCLE_CDEG {
            return Err(CodecError::InvalidField {
                field: "dir_cdeg",
                reason: format!("{} not below {FULL_CIRCLE_CDEG}", self.dir_cdeg),
            });
        }
        if self.max_p_cdbm < self.min_p_cdbm {
            return Err(CodecError::InvalidField {
                field: "max_p_cdbm",
                reason: format!("{} below min_p_cdbm {}", self.max_p_cdbm, self.min_p_cdbm),
            });
        }
        Ok(())
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_cms as f64 / 100.0
    }

    pub fn position_m(&self) -> crate::geometry::Point {
        crate::geometry::Point::new(self.pos_x_cm as f64 / 100.0, self.pos_y_cm as f64 / 100.0)
    }

    fn write(&self, out: &mut [u8]) {
        let mut w = Writer::new(out);
        w.put(&self.seq.to_be_bytes());
        w.put(&self.interval_ms.to_be_bytes());
        w.put(&self.timestamp_ms.to_be_bytes());
        w.put(&self.elp.0.to_be_bytes());
        w.put(&self.pos_x_cm.to_be_bytes());
        w.put(&self.pos_y_cm.to_be_bytes());
        w.put(&self.speed_cms.to_be_bytes());
        w.put(&self.dir_cdeg.to_be_bytes());
        w.put(&self.max_p_cdbm.to_be_bytes());
        w.put(&self.min_p_cdbm.to_be_bytes());
        w.put(&self.pow_u_cdbm.to_be_bytes());
        debug_assert_eq!(w.pos, HEADER_LEN);
    }

    fn read(bytes: &[u8]) -> Self {
        let mut r = Reader::new(bytes);
        Self {
            seq: u32::from_be_bytes(r.take()),
            interval_ms: u16::from_be_bytes(r.take()),
            timestamp_ms: u64::from_be_bytes(r.take()),
            elp: Elp(u64::from_be_bytes(r.take())),
            pos_x_cm: i32::from_be_bytes(r.take()),
            pos_y_cm: i32::from_be_bytes(r.take()),
            speed_cms: i16::from_be_bytes(r.take()),
            dir_cdeg: u16::from_be_bytes(r.take()),
            max_p_cdbm: i16::from_be_bytes(r.take()),
            min_p_cdbm: i16::from_be_bytes(r.take()),
            pow_u_cdbm: i16::from_be_bytes(r.take()),
        }
    }
}

/// A 10 Hz vehicle status beacon.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Beacon {
    pub header: BeaconHeader,
    pub piggyback: [u8; PIGGYBACK_LEN],
}

impl Default for Beacon {
    fn default() -> Self {
        Self {
            header: BeaconHeader { interval_ms: MIN_INTERVAL_MS, ..BeaconHeader::default() },
            piggyback: [0; PIGGYBACK_LEN],
        }
    }
}

impl Beacon {
    pub fn new(header: BeaconHeader) -> Self {
        Self { header, piggyback: [0; PIGGYBACK_LEN] }
    }

    /// Copies `data` into the piggyback region; the remainder stays zeroed.
    pub fn with_piggyback(mut self, data: &[u8]) -> Result<Self, CodecError> {
        if data.len() > PIGGYBACK_LEN {
            return Err(CodecError::InvalidField {
                field: "piggyback",
                reason: format!("{} bytes exceeds {PIGGYBACK_LEN}", data.len()),
            });
        }
        self.piggyback = [0; PIGGYBACK_LEN];
        self.piggyback[..data.len()].copy_from_slice(data);
        Ok(self)
    }
}

pub fn encode_beacon(b: &Beacon) -> Result<[u8; BEACON_LEN], CodecError> {
    b.header.validate()?;
    let mut out = [0u8; BEACON_LEN];
    b.header.write(&mut out[..HEADER_LEN]);
    out[HEADER_LEN..].copy_from_slice(&b.piggyback);
    Ok(out)
}

pub fn decode_beacon(bytes: &[u8]) -> Result<Beacon, CodecError> {
    if bytes.len() != BEACON_LEN {
        return Err(CodecError::MalformedBeacon(format!(
            "expected {BEACON_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let header = BeaconHeader::read(&bytes[..HEADER_LEN]);
    header.validate().map_err(|e| CodecError::MalformedBeacon(e.to_string()))?;
    let mut piggyback = [0u8; PIGGYBACK_LEN];
    piggyback.copy_from_slice(&bytes[HEADER_LEN..]);
    Ok(Beacon { header, piggyback })
}

/// A 512-byte non-safety message: beacon header plus a larger piggyback region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonSafetyMessage {
    pub header: BeaconHeader,
    pub piggyback: Box<[u8; NON_SAFETY_PIGGYBACK_LEN]>,
}

impl NonSafetyMessage {
    pub fn new(header: BeaconHeader, data: &[u8]) -> Result<Self, CodecError> {
        if data.len() > NON_SAFETY_PIGGYBACK_LEN {
            return Err(CodecError::InvalidField {
                field: "piggyback",
                reason: format!("{} bytes exceeds {NON_SAFETY_PIGGYBACK_LEN}", data.len()),
            });
        }
        let mut piggyback = Box::new([0u8; NON_SAFETY_PIGGYBACK_LEN]);
        piggyback[..data.len()].copy_from_slice(data);
        Ok(Self { header, piggyback })
    }
}

pub fn encode_non_safety(m: &NonSafetyMessage) -> Result<[u8; NON_SAFETY_LEN], CodecError> {
    m.header.validate()?;
    let mut out = [0u8; NON_SAFETY_LEN];
    m.header.write(&mut out[..HEADER_LEN]);
    out[HEADER_LEN..].copy_from_slice(&m.piggyback[..]);
    Ok(out)
}

pub fn decode_non_safety(bytes: &[u8]) -> Result<NonSafetyMessage, CodecError> {
    if bytes.len() != NON_SAFETY_LEN {
        return Err(CodecError::MalformedBeacon(format!(
            "expected {NON_SAFETY_LEN} bytes, got {}",
            bytes.len()
        )));
    }
    let header = BeaconHeader::read(&bytes[..HEADER_LEN]);
    header.validate().map_err(|e| CodecError::MalformedBeacon(e.to_string()))?;
    NonSafetyMessage::new(header, &bytes[HEADER_LEN..])
}

pub(crate) struct Writer<'a> {
    buf: &'a mut [u8],
    pos: usize,
}

impl<'a> Writer<'a> {
    pub(crate) fn new(buf: &'a mut [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn put(&mut self, bytes: &[u8]) {
        self.buf[self.pos..self.pos + bytes.len()].copy_from_slice(bytes);
        self.pos += bytes.len();
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    /// Callers size every read against a buffer whose length was checked up front.
    pub(crate) fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }
}
