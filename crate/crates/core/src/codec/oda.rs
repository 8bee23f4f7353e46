//! On-demand analysis payloads carried in 512-byte non-safety messages.
//!
//! Request (header = the decider's current beacon header):
//!
//! | offset | width | field                      |
//! |--------|-------|----------------------------|
//! | 0      | 1     | kind = `0x01`              |
//! | 1      | 2     | decider ACS, cm/s          |
//! | 3      | 1     | gap count `k` (<= 31)      |
//! | 4      | 15·k  | gaps                       |
//!
//! each gap: `choice_id` u16, `lane` u8, centre x cm i32, centre y cm i32, length cm u32.
//!
//! Response (header elp = decider, timestamp = issue time):
//!
//! | offset | width | field                      |
//! |--------|-------|----------------------------|
//! | 0      | 1     | kind = `0x02`              |
//! | 1      | 1     | verdict count `k` (<= 67)  |
//! | 2      | 7·k   | verdicts, best first       |
//!
//! each verdict: `choice_id` u16, `lane` u8, decision u8 (0 not preferred,
//! 1 possible danger, 2 preferred), class u8 (0 low, 1 high), AAVS cm/s u16
//! with `0xFFFF` meaning no surrounding traffic.

use super::{
    decode_non_safety, encode_non_safety, Beacon, BeaconHeader, CodecError, NonSafetyMessage, Reader, Writer,
    MIN_INTERVAL_MS, NON_SAFETY_LEN, NON_SAFETY_PIGGYBACK_LEN,
};
use crate::analytics::{AvSudClass, ChoiceVerdict, Decision};
use crate::geometry::Point;
use crate::rsu::{GapDescriptor, OdaRequest, OdaResponse};

pub const KIND_REQUEST: u8 = 0x01;
pub const KIND_RESPONSE: u8 = 0x02;
const GAP_LEN: usize = 15;
const VERDICT_LEN: usize = 7;
pub const MAX_GAPS: usize = (NON_SAFETY_PIGGYBACK_LEN - 4) / GAP_LEN;
pub const MAX_VERDICTS: usize = (NON_SAFETY_PIGGYBACK_LEN - 2) / VERDICT_LEN;
const AAVS_ABSENT: u16 = u16::MAX;

fn invalid(field: &'static str, reason: impl Into<String>) -> CodecError {
    CodecError::InvalidField { field, reason: reason.into() }
}

fn malformed(reason: impl Into<String>) -> CodecError {
    CodecError::MalformedBeacon(reason.into())
}

fn to_cms(field: &'static str, mps: f64) -> Result<u16, CodecError> {
    let cms = (mps * 100.0).round();
    if !(0.0..AAVS_ABSENT as f64).contains(&cms) {
        return Err(invalid(field, format!("{mps} m/s does not fit")));
    }
    Ok(cms as u16)
}

fn to_cm_i32(field: &'static str, m: f64) -> Result<i32, CodecError> {
    let cm = (m * 100.0).round();
    if !(i32::MIN as f64..=i32::MAX as f64).contains(&cm) {
        return Err(invalid(field, format!("{m} m does not fit")));
    }
    Ok(cm as i32)
}

pub fn encode_oda_request(req: &OdaRequest) -> Result<[u8; NON_SAFETY_LEN], CodecError> {
    if req.candidate_gaps.len() > MAX_GAPS {
        return Err(invalid("candidate_gaps", format!("{} gaps exceeds {MAX_GAPS}", req.candidate_gaps.len())));
    }
    if req.decider_beacon.header.elp != req.decider_elp {
        return Err(invalid("decider_elp", "does not match the beacon header"));
    }
    let mut body = [0u8; NON_SAFETY_PIGGYBACK_LEN];
    let mut w = Writer::new(&mut body);
    w.put(&[KIND_REQUEST]);
    w.put(&to_cms("decider_acs_mps", req.decider_acs_mps)?.to_be_bytes());
    w.put(&[req.candidate_gaps.len() as u8]);
    for g in &req.candidate_gaps {
        let len_cm = (g.length_m * 100.0).round();
        if !(0.0..=u32::MAX as f64).contains(&len_cm) {
            return Err(invalid("length_m", format!("{} m does not fit", g.length_m)));
        }
        w.put(&g.choice_id.to_be_bytes());
        w.put(&[g.lane_index]);
        w.put(&to_cm_i32("center_pos", g.center_pos.x)?.to_be_bytes());
        w.put(&to_cm_i32("center_pos", g.center_pos.y)?.to_be_bytes());
        w.put(&(len_cm as u32).to_be_bytes());
    }
    encode_non_safety(&NonSafetyMessage::new(req.decider_beacon.header, &body)?)
}

pub fn decode_oda_request(bytes: &[u8]) -> Result<OdaRequest, CodecError> {
    let msg = decode_non_safety(bytes)?;
    let mut r = Reader::new(&msg.piggyback[..]);
    let [kind] = r.take::<1>();
    if kind != KIND_REQUEST {
        return Err(malformed(format!("expected ODA request kind, got {kind:#04x}")));
    }
    let acs = u16::from_be_bytes(r.take());
    let [count] = r.take::<1>();
    if count as usize > MAX_GAPS {
        return Err(malformed(format!("gap count {count} exceeds {MAX_GAPS}")));
    }
    let candidate_gaps = (0..count)
        .map(|_| {
            let choice_id = u16::from_be_bytes(r.take());
            let [lane_index] = r.take::<1>();
            let x = i32::from_be_bytes(r.take());
            let y = i32::from_be_bytes(r.take());
            let len = u32::from_be_bytes(r.take());
            GapDescriptor {
                choice_id,
                lane_index,
                center_pos: Point::new(x as f64 / 100.0, y as f64 / 100.0),
                length_m: len as f64 / 100.0,
            }
        })
        .collect();
    Ok(OdaRequest {
        decider_elp: msg.header.elp,
        decider_beacon: Beacon::new(msg.header),
        decider_acs_mps: acs as f64 / 100.0,
        candidate_gaps,
    })
}

pub fn encode_oda_response(resp: &OdaResponse) -> Result<[u8; NON_SAFETY_LEN], CodecError> {
    if resp.verdicts.len() > MAX_VERDICTS {
        return Err(invalid("verdicts", format!("{} verdicts exceeds {MAX_VERDICTS}", resp.verdicts.len())));
    }
    let mut body = [0u8; NON_SAFETY_PIGGYBACK_LEN];
    let mut w = Writer::new(&mut body);
    w.put(&[KIND_RESPONSE, resp.verdicts.len() as u8]);
    for v in &resp.verdicts {
        let decision = match v.decision {
            Decision::NotPreferred => 0u8,
            Decision::NotPreferredDanger => 1,
            Decision::Preferred => 2,
        };
        let class = match v.avsud_class {
            AvSudClass::Low => 0u8,
            AvSudClass::High => 1,
        };
        let aavs = match v.aavs_mps {
            Some(a) => to_cms("aavs_mps", a)?,
            None => AAVS_ABSENT,
        };
        w.put(&v.choice_id.to_be_bytes());
        w.put(&[v.lane_index, decision, class]);
        w.put(&aavs.to_be_bytes());
    }
    let header = BeaconHeader {
        interval_ms: MIN_INTERVAL_MS,
        timestamp_ms: resp.issued_at_ms,
        elp: resp.decider_elp,
        ..BeaconHeader::default()
    };
    encode_non_safety(&NonSafetyMessage::new(header, &body)?)
}

pub fn decode_oda_response(bytes: &[u8]) -> Result<OdaResponse, CodecError> {
    let msg = decode_non_safety(bytes)?;
    let mut r = Reader::new(&msg.piggyback[..]);
    let [kind, count] = r.take::<2>();
    if kind != KIND_RESPONSE {
        return Err(malformed(format!("expected ODA response kind, got {kind:#04x}")));
    }
    if count as usize > MAX_VERDICTS {
        return Err(malformed(format!("verdict count {count} exceeds {MAX_VERDICTS}")));
    }
    let mut verdicts = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let choice_id = u16::from_be_bytes(r.take());
        let [lane_index, decision, class] = r.take::<3>();
        let aavs = u16::from_be_bytes(r.take());
        let decision = match decision {
            0 => Decision::NotPreferred,
            1 => Decision::NotPreferredDanger,
            2 => Decision::Preferred,
            d => return Err(malformed(format!("unknown decision code {d}"))),
        };
        let avsud_class = match class {
            0 => AvSudClass::Low,
            1 => AvSudClass::High,
            c => return Err(malformed(format!("unknown AvSud class code {c}"))),
        };
        verdicts.push(ChoiceVerdict {
            choice_id,
            lane_index,
            decision,
            aavs_mps: (aavs != AAVS_ABSENT).then(|| aavs as f64 / 100.0),
            avsud_class,
        });
    }
    Ok(OdaResponse { decider_elp: msg.header.elp, verdicts, issued_at_ms: msg.header.timestamp_ms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Elp;
    use proptest::prelude::*;

    fn header() -> BeaconHeader {
        BeaconHeader { seq: 7, interval_ms: 100, timestamp_ms: 12_300, elp: Elp(42), pos_x_cm: 40_000, pos_y_cm: 49_500, speed_cms: 3_000, ..Default::default() }
    }

    fn request() -> OdaRequest {
        OdaRequest {
            decider_elp: Elp(42),
            decider_beacon: Beacon::new(header()),
            decider_acs_mps: 29.87,
            candidate_gaps: vec![
                GapDescriptor { choice_id: 0, lane_index: 0, center_pos: Point::new(410.25, 491.25), length_m: 37.5 },
                GapDescriptor { choice_id: 1, lane_index: 2, center_pos: Point::new(395.0, 498.25), length_m: 120.0 },
            ],
        }
    }

    #[test]
    fn request_layout() {
        let bytes = encode_oda_request(&request()).unwrap();
        assert_eq!(bytes.len(), 512);
        assert_eq!(&bytes[..4], &[0, 0, 0, 7]);
        let body = &bytes[40..];
        assert_eq!(body[0], KIND_REQUEST);
        assert_eq!(&body[1..3], &2987u16.to_be_bytes());
        assert_eq!(body[3], 2);
        // second gap: choice 1, lane 2, x 39500 cm
        assert_eq!(&body[19..22], &[0, 1, 2]);
        assert_eq!(&body[22..26], &39_500i32.to_be_bytes());
        assert!(body[4 + 2 * GAP_LEN..].iter().all(|&b| b == 0));
    }

    #[test]
    fn request_round_trip() {
        let req = request();
        assert_eq!(decode_oda_request(&encode_oda_request(&req).unwrap()).unwrap(), req);
    }

    #[test]
    fn response_round_trip_with_absent_aavs() {
        let resp = OdaResponse {
            decider_elp: Elp(42),
            issued_at_ms: 12_300,
            verdicts: vec![
                ChoiceVerdict { choice_id: 1, lane_index: 2, decision: Decision::Preferred, aavs_mps: None, avsud_class: AvSudClass::Low },
                ChoiceVerdict { choice_id: 0, lane_index: 0, decision: Decision::NotPreferredDanger, aavs_mps: Some(15.25), avsud_class: AvSudClass::High },
            ],
        };
        let bytes = encode_oda_response(&resp).unwrap();
        assert_eq!(&bytes[40..44], &[KIND_RESPONSE, 2, 0, 1]);
        assert_eq!(&bytes[45..49], &[2, 0, 0xFF, 0xFF]);
        assert_eq!(decode_oda_response(&bytes).unwrap(), resp);
    }

    #[test]
    fn kinds_are_not_interchangeable() {
        let bytes = encode_oda_request(&request()).unwrap();
        assert!(matches!(decode_oda_response(&bytes), Err(CodecError::MalformedBeacon(_))));
        assert!(decode_oda_request(&bytes[..511]).is_err());
    }

    #[test]
    fn too_many_gaps_rejected() {
        let mut req = request();
        req.candidate_gaps = vec![req.candidate_gaps[0]; MAX_GAPS + 1];
        assert!(matches!(encode_oda_request(&req), Err(CodecError::InvalidField { field: "candidate_gaps", .. })));
        req.candidate_gaps.truncate(MAX_GAPS);
        assert_eq!(decode_oda_request(&encode_oda_request(&req).unwrap()).unwrap().candidate_gaps.len(), MAX_GAPS);
    }

    #[test]
    fn unknown_decision_code_rejected() {
        let mut resp = OdaResponse { decider_elp: Elp(1), issued_at_ms: 0, verdicts: vec![] };
        resp.verdicts.push(ChoiceVerdict { choice_id: 0, lane_index: 0, decision: Decision::Preferred, aavs_mps: Some(1.0), avsud_class: AvSudClass::Low });
        let mut bytes = encode_oda_response(&resp).unwrap();
        bytes[45] = 9;
        assert!(decode_oda_response(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn quantised_requests_round_trip(
            acs_cms in 0u16..4_500,
            gaps in prop::collection::vec((any::<u16>(), 0u8..6, -100_000i32..200_000, 0i32..100_000, 1u32..20_000), 0..=MAX_GAPS),
        ) {
            let req = OdaRequest {
                decider_elp: Elp(42),
                decider_beacon: Beacon::new(header()),
                decider_acs_mps: acs_cms as f64 / 100.0,
                candidate_gaps: gaps.iter().map(|&(id, lane, x, y, len)| GapDescriptor {
                    choice_id: id,
                    lane_index: lane,
                    center_pos: Point::new(x as f64 / 100.0, y as f64 / 100.0),
                    length_m: len as f64 / 100.0,
                }).collect(),
            };
            let bytes = encode_oda_request(&req).unwrap();
            prop_assert_eq!(decode_oda_request(&bytes).unwrap(), req);
        }
    }
}
