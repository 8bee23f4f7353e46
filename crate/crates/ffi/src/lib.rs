//! C ABI over the beacon codec, the roadside unit and the scenario runner.
//!
//! Every function returns a [`LaneselStatus`]. On failure a message is kept
//! per thread and can be read with [`lanesel_last_error_message`]. Handles
//! are opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lanesel::analytics::AnalyticsConfig;
use lanesel::codec::oda::{decode_oda_request, encode_oda_response};
use lanesel::codec::{decode_beacon, encode_beacon, Beacon, BeaconHeader, Elp, BEACON_LEN, NON_SAFETY_LEN, PIGGYBACK_LEN};
use lanesel::config::ScenarioConfig;
use lanesel::geometry::{CorridorConfig, Point};
use lanesel::metrics::RunMetrics;
use lanesel::rsu::{RsuConfig, RsuError, RsuId, RsuState};
use lanesel::sim::run_scenario;

pub const LANESEL_BEACON_LEN: usize = 100;
pub const LANESEL_PIGGYBACK_LEN: usize = 60;
pub const LANESEL_ODA_LEN: usize = 512;

const _: () = assert!(LANESEL_BEACON_LEN == BEACON_LEN && LANESEL_PIGGYBACK_LEN == PIGGYBACK_LEN && LANESEL_ODA_LEN == NON_SAFETY_LEN);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneselStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Bytes did not decode, or a field is out of range for encoding.
    Codec = 3,
    OutOfRange = 4,
    /// The roadside unit refused the request.
    Rejected = 5,
    RunFailed = 6,
    NoData = 7,
    Panic = 8,
}

/// Decoded safety beacon. Speeds and positions use the wire units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaneselBeacon {
    pub seq: u32,
    pub interval_ms: u16,
    pub timestamp_ms: u64,
    pub elp: u64,
    pub pos_x_cm: i32,
    pub pos_y_cm: i32,
    pub speed_cms: i16,
    pub dir_cdeg: u16,
    pub max_p_cdbm: i16,
    pub min_p_cdbm: i16,
    pub pow_u_cdbm: i16,
    pub piggyback: [u8; LANESEL_PIGGYBACK_LEN],
}

impl From<&Beacon> for LaneselBeacon {
    fn from(b: &Beacon) -> Self {
        let h = &b.header;
        Self {
            seq: h.seq,
            interval_ms: h.interval_ms,
            timestamp_ms: h.timestamp_ms,
            elp: h.elp.0,
            pos_x_cm: h.pos_x_cm,
            pos_y_cm: h.pos_y_cm,
            speed_cms: h.speed_cms,
            dir_cdeg: h.dir_cdeg,
            max_p_cdbm: h.max_p_cdbm,
            min_p_cdbm: h.min_p_cdbm,
            pow_u_cdbm: h.pow_u_cdbm,
            piggyback: b.piggyback,
        }
    }
}

impl From<&LaneselBeacon> for Beacon {
    fn from(b: &LaneselBeacon) -> Self {
        Beacon {
            header: BeaconHeader {
                seq: b.seq,
                interval_ms: b.interval_ms,
                timestamp_ms: b.timestamp_ms,
                elp: Elp(b.elp),
                pos_x_cm: b.pos_x_cm,
                pos_y_cm: b.pos_y_cm,
                speed_cms: b.speed_cms,
                dir_cdeg: b.dir_cdeg,
                max_p_cdbm: b.max_p_cdbm,
                min_p_cdbm: b.min_p_cdbm,
                pow_u_cdbm: b.pow_u_cdbm,
            },
            piggyback: b.piggyback,
        }
    }
}

/// Opaque roadside unit.
pub struct LaneselRsu(RsuState);

/// Opaque results of one scenario run.
pub struct LaneselRunMetrics(RunMetrics);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: LaneselStatus, msg: impl Into<String>) -> LaneselStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> LaneselStatus) -> LaneselStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == LaneselStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(LaneselStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` bytes.
unsafe fn bytes<'a>(ptr: *const u8, len: usize) -> Option<&'a [u8]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn lanesel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Encodes `beacon` into the 100 bytes at `out`.
///
/// # Safety
/// `beacon` must point to a valid struct and `out` to 100 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lanesel_beacon_encode(beacon: *const LaneselBeacon, out: *mut u8) -> LaneselStatus {
    guard(|| {
        if beacon.is_null() || out.is_null() {
            return fail(LaneselStatus::NullPointer, "null argument");
        }
        match encode_beacon(&Beacon::from(&*beacon)) {
            Ok(b) => {
                ptr::copy_nonoverlapping(b.as_ptr(), out, BEACON_LEN);
                LaneselStatus::Ok
            }
            Err(e) => fail(LaneselStatus::Codec, e.to_string()),
        }
    })
}

/// Decodes a 100-byte beacon.
///
/// # Safety
/// `data` must be valid for `len` bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_beacon_decode(data: *const u8, len: usize, out: *mut LaneselBeacon) -> LaneselStatus {
    guard(|| {
        let Some(data) = bytes(data, len) else {
            return fail(LaneselStatus::NullPointer, "null data");
        };
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        match decode_beacon(data) {
            Ok(b) => {
                *out = LaneselBeacon::from(&b);
                LaneselStatus::Ok
            }
            Err(e) => fail(LaneselStatus::Codec, e.to_string()),
        }
    })
}

/// Creates a roadside unit at (`x_m`, `y_m`) on the default corridor.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_new(x_m: f64, y_m: f64, coverage_radius_m: f64, out: *mut *mut LaneselRsu) -> LaneselStatus {
    guard(|| {
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        if !(coverage_radius_m > 0.0 && x_m.is_finite() && y_m.is_finite()) {
            return fail(LaneselStatus::InvalidArgument, "coverage radius must be positive and the position finite");
        }
        let rsu = RsuState::new(
            RsuId(0),
            Point::new(x_m, y_m),
            coverage_radius_m,
            CorridorConfig::default(),
            RsuConfig::default(),
            AnalyticsConfig::default(),
        );
        *out = Box::into_raw(Box::new(LaneselRsu(rsu)));
        LaneselStatus::Ok
    })
}

/// # Safety
/// `rsu` must be null or a handle from [`lanesel_rsu_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_free(rsu: *mut LaneselRsu) {
    if !rsu.is_null() {
        drop(Box::from_raw(rsu));
    }
}

fn rsu_status(e: &RsuError) -> LaneselStatus {
    match e {
        RsuError::OutOfRange { .. } | RsuError::OffCorridor { .. } => LaneselStatus::OutOfRange,
        RsuError::InvalidBeacon { .. } => LaneselStatus::Codec,
        RsuError::UnknownDecider(_) | RsuError::NoCandidates | RsuError::InvalidGap { .. } => LaneselStatus::Rejected,
    }
}

/// Feeds one encoded beacon heard at `now_ms`. Duplicates and
/// out-of-order beacons are dropped and still return `Ok`.
///
/// # Safety
/// `rsu` must be a live handle and `data` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_ingest(rsu: *mut LaneselRsu, data: *const u8, len: usize, now_ms: u64) -> LaneselStatus {
    guard(|| {
        let (Some(rsu), Some(data)) = (rsu.as_mut(), bytes(data, len)) else {
            return fail(LaneselStatus::NullPointer, "null argument");
        };
        let b = match decode_beacon(data) {
            Ok(b) => b,
            Err(e) => return fail(LaneselStatus::Codec, e.to_string()),
        };
        match rsu.0.ingest_beacon(&b, now_ms) {
            Ok(_) => LaneselStatus::Ok,
            Err(e) => fail(rsu_status(&e), e.to_string()),
        }
    })
}

/// Drops records not refreshed within the expiry window.
///
/// # Safety
/// `rsu` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_expire(rsu: *mut LaneselRsu, now_ms: u64) -> LaneselStatus {
    guard(|| match rsu.as_mut() {
        Some(r) => {
            r.0.expire_stale(now_ms);
            LaneselStatus::Ok
        }
        None => fail(LaneselStatus::NullPointer, "null handle"),
    })
}

/// # Safety
/// `rsu` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_vehicle_count(rsu: *const LaneselRsu, out: *mut usize) -> LaneselStatus {
    guard(|| match (rsu.as_ref(), out.is_null()) {
        (Some(r), false) => {
            *out = r.0.len();
            LaneselStatus::Ok
        }
        _ => fail(LaneselStatus::NullPointer, "null argument"),
    })
}

/// Answers an encoded 512-byte ODA request with a 512-byte response
/// written to `out`. The decider's beacon is ingested first.
///
/// # Safety
/// `rsu` must be a live handle, `request` valid for `len` bytes and `out`
/// valid for 512 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lanesel_rsu_handle_oda(
    rsu: *mut LaneselRsu,
    request: *const u8,
    len: usize,
    now_ms: u64,
    out: *mut u8,
) -> LaneselStatus {
    guard(|| {
        let (Some(rsu), Some(request)) = (rsu.as_mut(), bytes(request, len)) else {
            return fail(LaneselStatus::NullPointer, "null argument");
        };
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        let req = match decode_oda_request(request) {
            Ok(r) => r,
            Err(e) => return fail(LaneselStatus::Codec, e.to_string()),
        };
        if let Err(e) = rsu.0.ingest_beacon(&req.decider_beacon, now_ms) {
            return fail(rsu_status(&e), e.to_string());
        }
        let resp = match rsu.0.handle_oda(&req, now_ms) {
            Ok(r) => r,
            Err(e) => return fail(rsu_status(&e), e.to_string()),
        };
        match encode_oda_response(&resp) {
            Ok(b) => {
                ptr::copy_nonoverlapping(b.as_ptr(), out, NON_SAFETY_LEN);
                LaneselStatus::Ok
            }
            Err(e) => fail(LaneselStatus::Codec, e.to_string()),
        }
    })
}

/// Runs a scenario described by a NUL-terminated TOML string.
///
/// # Safety
/// `config_toml` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_run_scenario(config_toml: *const c_char, out: *mut *mut LaneselRunMetrics) -> LaneselStatus {
    guard(|| {
        if config_toml.is_null() || out.is_null() {
            return fail(LaneselStatus::NullPointer, "null argument");
        }
        let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
            return fail(LaneselStatus::InvalidArgument, "config is not UTF-8");
        };
        let cfg = match ScenarioConfig::from_toml_str(text) {
            Ok(c) => c,
            Err(e) => return fail(LaneselStatus::InvalidArgument, e.to_string()),
        };
        match run_scenario(&cfg) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(LaneselRunMetrics(m)));
                LaneselStatus::Ok
            }
            Err(e) => fail(LaneselStatus::RunFailed, e.to_string()),
        }
    })
}

/// # Safety
/// `metrics` must be null or a handle from [`lanesel_run_scenario`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lanesel_metrics_free(metrics: *mut LaneselRunMetrics) {
    if !metrics.is_null() {
        drop(Box::from_raw(metrics));
    }
}

/// Mean traversal time in seconds; `NoData` when no traversal completed.
///
/// # Safety
/// `metrics` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_metrics_mean_travel_time(metrics: *const LaneselRunMetrics, out: *mut f64) -> LaneselStatus {
    guard(|| {
        let Some(m) = metrics.as_ref() else {
            return fail(LaneselStatus::NullPointer, "null handle");
        };
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        match m.0.mean_travel_time_s {
            Some(t) => {
                *out = t;
                LaneselStatus::Ok
            }
            None => fail(LaneselStatus::NoData, "no completed traversals"),
        }
    })
}

/// Counters of one run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaneselRunSummary {
    pub vehicle_count: u32,
    pub traversals: u64,
    pub lane_changes: u64,
    pub lane_change_aborts: u64,
    pub odas_issued: u64,
    pub odas_answered: u64,
    pub beacons_sent: u64,
    pub beacons_delivered: u64,
    pub beacon_delivery_ratio: f64,
    pub audit_violations: u64,
}

/// # Safety
/// `metrics` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_metrics_summary(metrics: *const LaneselRunMetrics, out: *mut LaneselRunSummary) -> LaneselStatus {
    guard(|| {
        let Some(m) = metrics.as_ref() else {
            return fail(LaneselStatus::NullPointer, "null handle");
        };
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        let m = &m.0;
        *out = LaneselRunSummary {
            vehicle_count: m.vehicle_count,
            traversals: m.traversals.len() as u64,
            lane_changes: m.lane_changes(),
            lane_change_aborts: m.lane_change_aborts,
            odas_issued: m.odas_issued,
            odas_answered: m.odas_answered,
            beacons_sent: m.beacons_sent,
            beacons_delivered: m.beacons_delivered,
            beacon_delivery_ratio: m.beacon_delivery_ratio(),
            audit_violations: m.audit.total(),
        };
        LaneselStatus::Ok
    })
}

/// Per-run CSV as a new string; release it with [`lanesel_string_free`].
///
/// # Safety
/// `metrics` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lanesel_metrics_csv(metrics: *const LaneselRunMetrics, out: *mut *mut c_char) -> LaneselStatus {
    guard(|| {
        let Some(m) = metrics.as_ref() else {
            return fail(LaneselStatus::NullPointer, "null handle");
        };
        if out.is_null() {
            return fail(LaneselStatus::NullPointer, "null output");
        }
        match CString::new(m.0.to_csv_string()) {
            Ok(s) => {
                *out = s.into_raw();
                LaneselStatus::Ok
            }
            Err(_) => fail(LaneselStatus::RunFailed, "csv contains a NUL byte"),
        }
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lanesel_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
