//! Minimal SNMPv2c client for the MIB-II Interface group.
//!
//! Covers GetRequest encoding, GetResponse decoding, a polling loop over
//! UDP, Counter32 delta extraction, and a loopback stub agent used to
//! exercise the poller without real hardware.

pub mod ber;
mod poll;
mod stub;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::features::INTERFACE_VARIABLES;

pub use poll::{counter_delta, deltas, poll, write_delta_csv, CounterSample, PollConfig, Poller};
pub use stub::{load_fixture, parse_fixture, FixtureCell, StubAgent, StubHandle};

/// SNMPv2c encodes its version field as 1.
pub const VERSION_V2C: i64 = 1;
pub const PDU_GET: u8 = 0xA0;
pub const PDU_RESPONSE: u8 = 0xA2;

#[derive(Debug, Error)]
pub enum SnmpError {
    #[error("malformed BER at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },
    #[error("unsupported SNMP version {0} (only v2c)")]
    Version(i64),
    #[error("agent reported {name} (error-status {status}, index {index})")]
    Status { status: i64, name: &'static str, index: i64 },
    #[error("invalid OID: {0}")]
    InvalidOid(String),
    #[error("unexpected PDU tag 0x{0:02x}")]
    UnexpectedPdu(u8),
    #[error("request has no OIDs")]
    EmptyRequest,
    #[error("transport: {0}")]
    Transport(String),
}

/// Name of an SNMPv2 error-status code.
pub fn error_status_name(status: i64) -> &'static str {
    match status {
        0 => "noError",
        1 => "tooBig",
        2 => "noSuchName",
        3 => "badValue",
        4 => "readOnly",
        5 => "genErr",
        6 => "noAccess",
        7 => "wrongType",
        8 => "wrongLength",
        9 => "wrongEncoding",
        10 => "wrongValue",
        11 => "noCreation",
        12 => "inconsistentValue",
        13 => "resourceUnavailable",
        14 => "commitFailed",
        15 => "undoFailed",
        16 => "authorizationError",
        17 => "notWritable",
        18 => "inconsistentName",
        _ => "unknownError",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Oid(Vec<u32>);

impl Oid {
    pub fn new(arcs: Vec<u32>) -> Result<Self, SnmpError> {
        if arcs.len() < 2 {
            return Err(SnmpError::InvalidOid("fewer than two arcs".into()));
        }
        if arcs[0] > 2 {
            return Err(SnmpError::InvalidOid(format!("first arc {} > 2", arcs[0])));
        }
        if arcs[0] < 2 && arcs[1] > 39 {
            return Err(SnmpError::InvalidOid(format!("second arc {} > 39", arcs[1])));
        }
        if arcs[0] == 2 && arcs[1] > u32::MAX - 80 {
            return Err(SnmpError::InvalidOid("second arc too large".into()));
        }
        Ok(Oid(arcs))
    }

    pub fn arcs(&self) -> &[u32] {
        &self.0
    }

    pub fn child(&self, arc: u32) -> Oid {
        let mut arcs = self.0.clone();
        arcs.push(arc);
        Oid(arcs)
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl FromStr for Oid {
    type Err = SnmpError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let arcs = s
            .trim()
            .trim_start_matches('.')
            .split('.')
            .map(|p| p.parse::<u32>().map_err(|_| SnmpError::InvalidOid(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Oid::new(arcs)
    }
}

/// ifTable column OIDs (1.3.6.1.2.1.2.2.1.<column>) in Interface-group order.
pub const INTERFACE_COLUMNS: [u32; 8] = [10, 16, 19, 11, 12, 13, 17, 18];

/// The eight Interface-group instance OIDs for `if_index`, aligned with
/// [`INTERFACE_VARIABLES`].
pub fn interface_oids(if_index: u32) -> Vec<Oid> {
    INTERFACE_COLUMNS
        .iter()
        .map(|&col| Oid(vec![1, 3, 6, 1, 2, 1, 2, 2, 1, col, if_index]))
        .collect()
}

/// Variable name for an Interface-group instance OID, if it is one.
pub fn interface_variable(oid: &Oid, if_index: u32) -> Option<&'static str> {
    let a = oid.arcs();
    if a.len() != 11 || a[..9] != [1, 3, 6, 1, 2, 1, 2, 2, 1] || a[10] != if_index {
        return None;
    }
    INTERFACE_COLUMNS
        .iter()
        .position(|&c| c == a[9])
        .map(|i| INTERFACE_VARIABLES[i])
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Value {
    Integer(i64),
    OctetString(Vec<u8>),
    Null,
    Counter32(u32),
    Gauge32(u32),
    TimeTicks(u32),
    NoSuchObject,
    NoSuchInstance,
    EndOfMibView,
}

impl Value {
    /// Numeric reading as an unsigned 32-bit counter, if it is one.
    pub fn as_counter(&self) -> Option<u32> {
        match *self {
            Value::Counter32(v) | Value::Gauge32(v) => Some(v),
            Value::Integer(v) => u32::try_from(v).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBind {
    pub oid: Oid,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pdu {
    pub tag: u8,
    pub request_id: i32,
    pub error_status: i64,
    pub error_index: i64,
    pub varbinds: Vec<VarBind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub community: Vec<u8>,
    pub pdu: Pdu,
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut vbs = Vec::new();
        for vb in &self.pdu.varbinds {
            let mut one = Vec::new();
            ber::push_tlv(&mut one, ber::TAG_OID, &ber::oid_contents(&vb.oid));
            ber::push_value(&mut one, &vb.value);
            ber::push_tlv(&mut vbs, ber::TAG_SEQUENCE, &one);
        }
        let mut pdu = Vec::new();
        ber::push_tlv(&mut pdu, ber::TAG_INTEGER, &ber::integer_contents(i64::from(self.pdu.request_id)));
        ber::push_tlv(&mut pdu, ber::TAG_INTEGER, &ber::integer_contents(self.pdu.error_status));
        ber::push_tlv(&mut pdu, ber::TAG_INTEGER, &ber::integer_contents(self.pdu.error_index));
        ber::push_tlv(&mut pdu, ber::TAG_SEQUENCE, &vbs);

        let mut msg = Vec::new();
        ber::push_tlv(&mut msg, ber::TAG_INTEGER, &ber::integer_contents(VERSION_V2C));
        ber::push_tlv(&mut msg, ber::TAG_OCTET_STRING, &self.community);
        ber::push_tlv(&mut msg, self.pdu.tag, &pdu);

        let mut out = Vec::with_capacity(msg.len() + 4);
        ber::push_tlv(&mut out, ber::TAG_SEQUENCE, &msg);
        out
    }

    /// Parses any v2c message; error-status is returned, not checked.
    pub fn decode(bytes: &[u8]) -> Result<Self, SnmpError> {
        let mut top = ber::Reader::new(bytes);
        let mut msg = top.expect(ber::TAG_SEQUENCE)?;
        top.finish()?;
        let version = msg.integer()?;
        if version != VERSION_V2C {
            return Err(SnmpError::Version(version));
        }
        let community = msg.expect(ber::TAG_OCTET_STRING)?.rest().to_vec();
        let pdu_at = msg.offset();
        let (tag, mut pdu) = msg.tlv()?;
        msg.finish()?;
        if tag & 0xE0 != 0xA0 {
            return Err(SnmpError::Decode {
                offset: pdu_at,
                reason: format!("expected a PDU, found tag 0x{tag:02x}"),
            });
        }
        let id_at = pdu.offset();
        let request_id = i32::try_from(pdu.integer()?).map_err(|_| SnmpError::Decode {
            offset: id_at,
            reason: "request-id outside 32-bit range".into(),
        })?;
        let error_status = pdu.integer()?;
        let error_index = pdu.integer()?;
        let mut list = pdu.expect(ber::TAG_SEQUENCE)?;
        pdu.finish()?;
        let mut varbinds = Vec::new();
        while !list.is_empty() {
            let mut vb = list.expect(ber::TAG_SEQUENCE)?;
            let oid = vb.oid()?;
            let value = vb.value()?;
            vb.finish()?;
            varbinds.push(VarBind { oid, value });
        }
        Ok(Message {
            community,
            pdu: Pdu {
                tag,
                request_id,
                error_status,
                error_index,
                varbinds,
            },
        })
    }
}

/// BER-encoded v2c GetRequest with Null placeholders for every OID.
pub fn encode_get(oids: &[Oid], community: &[u8], request_id: i32) -> Result<Vec<u8>, SnmpError> {
    if oids.is_empty() {
        return Err(SnmpError::EmptyRequest);
    }
    for oid in oids {
        Oid::new(oid.arcs().to_vec())?;
    }
    Ok(Message {
        community: community.to_vec(),
        pdu: Pdu {
            tag: PDU_GET,
            request_id,
            error_status: 0,
            error_index: 0,
            varbinds: oids
                .iter()
                .map(|oid| VarBind {
                    oid: oid.clone(),
                    value: Value::Null,
                })
                .collect(),
        },
    }
    .encode())
}

/// Decodes a GetRequest back into (community, request-id, OIDs).
pub fn decode_get(bytes: &[u8]) -> Result<(Vec<u8>, i32, Vec<Oid>), SnmpError> {
    let msg = Message::decode(bytes)?;
    if msg.pdu.tag != PDU_GET {
        return Err(SnmpError::UnexpectedPdu(msg.pdu.tag));
    }
    Ok((
        msg.community,
        msg.pdu.request_id,
        msg.pdu.varbinds.into_iter().map(|vb| vb.oid).collect(),
    ))
}

pub fn encode_response(
    community: &[u8],
    request_id: i32,
    error_status: i64,
    error_index: i64,
    varbinds: Vec<VarBind>,
) -> Vec<u8> {
    Message {
        community: community.to_vec(),
        pdu: Pdu {
            tag: PDU_RESPONSE,
            request_id,
            error_status,
            error_index,
            varbinds,
        },
    }
    .encode()
}

/// Parses a GetResponse. A non-zero error-status becomes
/// [`SnmpError::Status`]. The community string is not checked.
pub fn decode_response(bytes: &[u8]) -> Result<(i32, Vec<VarBind>), SnmpError> {
    let msg = Message::decode(bytes)?;
    if msg.pdu.tag != PDU_RESPONSE {
        return Err(SnmpError::UnexpectedPdu(msg.pdu.tag));
    }
    if msg.pdu.error_status != 0 {
        return Err(SnmpError::Status {
            status: msg.pdu.error_status,
            name: error_status_name(msg.pdu.error_status),
            index: msg.pdu.error_index,
        });
    }
    Ok((msg.pdu.request_id, msg.pdu.varbinds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Walks a BER tree checking every length field against its contents.
    fn validate_structure(bytes: &[u8]) -> usize {
        let mut pos = 0;
        let mut count = 0;
        while pos < bytes.len() {
            let tag = bytes[pos];
            pos += 1;
            let first = bytes[pos];
            pos += 1;
            let len = if first < 0x80 {
                first as usize
            } else {
                let n = (first & 0x7F) as usize;
                assert!(n > 0, "indefinite length");
                let mut l = 0usize;
                for _ in 0..n {
                    l = (l << 8) | bytes[pos] as usize;
                    pos += 1;
                }
                assert!(l >= 0x80, "long form used for short length");
                l
            };
            assert!(pos + len <= bytes.len(), "length overruns parent");
            if tag & 0x20 != 0 {
                count += validate_structure(&bytes[pos..pos + len]);
            }
            pos += len;
            count += 1;
        }
        assert_eq!(pos, bytes.len());
        count
    }

    #[test]
    fn interface_oid_table() {
        let oids = interface_oids(2);
        let text: Vec<String> = oids.iter().map(ToString::to_string).collect();
        assert_eq!(text[0], "1.3.6.1.2.1.2.2.1.10.2");
        assert_eq!(text[1], "1.3.6.1.2.1.2.2.1.16.2");
        assert_eq!(text[2], "1.3.6.1.2.1.2.2.1.19.2");
        assert_eq!(text[3], "1.3.6.1.2.1.2.2.1.11.2");
        assert_eq!(text[4], "1.3.6.1.2.1.2.2.1.12.2");
        assert_eq!(text[5], "1.3.6.1.2.1.2.2.1.13.2");
        assert_eq!(text[6], "1.3.6.1.2.1.2.2.1.17.2");
        assert_eq!(text[7], "1.3.6.1.2.1.2.2.1.18.2");
        for (oid, name) in oids.iter().zip(INTERFACE_VARIABLES) {
            assert_eq!(interface_variable(oid, 2), Some(name));
            assert_eq!(interface_variable(oid, 3), None);
        }
    }

    #[test]
    fn oid_invariants() {
        assert!(Oid::new(vec![1]).is_err());
        assert!(Oid::new(vec![3, 1]).is_err());
        assert!(Oid::new(vec![1, 40]).is_err());
        assert!(Oid::new(vec![2, 999]).is_ok());
        assert_eq!(".1.3.6.1".parse::<Oid>().unwrap().arcs(), &[1, 3, 6, 1]);
        assert!("1.x.3".parse::<Oid>().is_err());
    }

    #[test]
    fn ifinoctets_first_byte_is_0x2b() {
        let oid: Oid = "1.3.6.1.2.1.2.2.1.10.2".parse().unwrap();
        let c = ber::oid_contents(&oid);
        assert_eq!(c[0], 0x2B);
        assert_eq!(c, vec![0x2B, 6, 1, 2, 1, 2, 2, 1, 10, 2]);
        let bytes = encode_get(&[oid], b"public", 1).unwrap();
        let needle = [0x06, 0x0A, 0x2B, 6, 1, 2, 1, 2, 2, 1, 10, 2];
        assert!(bytes.windows(needle.len()).any(|w| w == needle));
    }

    #[test]
    fn get_round_trip() {
        let oid: Oid = "1.3.6.1.2.1.1.3.0".parse().unwrap();
        let bytes = encode_get(std::slice::from_ref(&oid), b"public", 0x1234_5678).unwrap();
        let (community, id, oids) = decode_get(&bytes).unwrap();
        assert_eq!(community, b"public");
        assert_eq!(id, 0x1234_5678);
        assert_eq!(oids, vec![oid]);
        assert_eq!(bytes[0], 0x30);
        validate_structure(&bytes);
        assert!(matches!(encode_get(&[], b"public", 1), Err(SnmpError::EmptyRequest)));
    }

    #[test]
    fn known_get_bytes() {
        // GetRequest for 1.3.6.1.2.1.1.3.0, community "public", id 1.
        let want: Vec<u8> = vec![
            0x30, 0x26, 0x02, 0x01, 0x01, 0x04, 0x06, b'p', b'u', b'b', b'l', b'i', b'c', 0xA0, 0x19, 0x02, 0x01,
            0x01, 0x02, 0x01, 0x00, 0x02, 0x01, 0x00, 0x30, 0x0E, 0x30, 0x0C, 0x06, 0x08, 0x2B, 0x06, 0x01,
            0x02, 0x01, 0x01, 0x03, 0x00, 0x05, 0x00,
        ];
        let oid: Oid = "1.3.6.1.2.1.1.3.0".parse().unwrap();
        assert_eq!(encode_get(&[oid], b"public", 1).unwrap(), want);
    }

    #[test]
    fn response_round_trip_and_status() {
        let vbs: Vec<VarBind> = interface_oids(1)
            .into_iter()
            .enumerate()
            .map(|(i, oid)| VarBind {
                oid,
                value: Value::Counter32(u32::MAX - i as u32),
            })
            .collect();
        let bytes = encode_response(b"public", -7, 0, 0, vbs.clone());
        assert_eq!(decode_response(&bytes).unwrap(), (-7, vbs.clone()));

        let bytes = encode_response(b"public", 3, 2, 1, vbs);
        let err = decode_response(&bytes).unwrap_err();
        assert!(matches!(err, SnmpError::Status { status: 2, name: "noSuchName", .. }));
        assert!(err.to_string().contains("noSuchName"));
    }

    #[test]
    fn version_and_pdu_checks() {
        let oid: Oid = "1.3.6.1".parse().unwrap();
        let mut bytes = encode_get(&[oid], b"c", 1).unwrap();
        assert!(matches!(decode_response(&bytes), Err(SnmpError::UnexpectedPdu(PDU_GET))));
        bytes[4] = 0; // version field: v1
        assert!(matches!(Message::decode(&bytes), Err(SnmpError::Version(0))));
    }

    #[test]
    fn truncation_is_reported_with_position() {
        let oid: Oid = "1.3.6.1.2.1.1.3.0".parse().unwrap();
        let bytes = encode_get(&[oid], b"public", 1).unwrap();
        for cut in 1..bytes.len() {
            match Message::decode(&bytes[..cut]) {
                Err(SnmpError::Decode { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    fn arb_oid() -> impl Strategy<Value = Oid> {
        (0u32..3, 0u32..40, proptest::collection::vec(any::<u32>(), 0..12))
            .prop_map(|(a, b, rest)| {
                let mut arcs = vec![a, b];
                arcs.extend(rest);
                Oid::new(arcs).unwrap()
            })
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Integer),
            proptest::collection::vec(any::<u8>(), 0..300).prop_map(Value::OctetString),
            Just(Value::Null),
            any::<u32>().prop_map(Value::Counter32),
            any::<u32>().prop_map(Value::Gauge32),
            any::<u32>().prop_map(Value::TimeTicks),
            Just(Value::NoSuchObject),
            Just(Value::NoSuchInstance),
            Just(Value::EndOfMibView),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn randomized_response_round_trip(
            id: i32,
            community in proptest::collection::vec(any::<u8>(), 0..40),
            vbs in proptest::collection::vec((arb_oid(), arb_value()), 0..20),
        ) {
            let vbs: Vec<VarBind> = vbs.into_iter().map(|(oid, value)| VarBind { oid, value }).collect();
            let bytes = encode_response(&community, id, 0, 0, vbs.clone());
            validate_structure(&bytes);
            prop_assert_eq!(decode_response(&bytes).unwrap(), (id, vbs));
        }

        #[test]
        fn randomized_get_round_trip(
            id: i32,
            community in proptest::collection::vec(any::<u8>(), 0..40),
            oids in proptest::collection::vec(arb_oid(), 1..20),
        ) {
            let bytes = encode_get(&oids, &community, id).unwrap();
            validate_structure(&bytes);
            prop_assert_eq!(decode_get(&bytes).unwrap(), (community, id, oids));
        }

        #[test]
        fn decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = Message::decode(&bytes);
        }
    }
}
