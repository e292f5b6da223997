//! Definite-length BER for the handful of ASN.1 types SNMPv2c GET needs.

use super::{Oid, SnmpError, Value};

pub const TAG_INTEGER: u8 = 0x02;
pub const TAG_OCTET_STRING: u8 = 0x04;
pub const TAG_NULL: u8 = 0x05;
pub const TAG_OID: u8 = 0x06;
pub const TAG_SEQUENCE: u8 = 0x30;
pub const TAG_COUNTER32: u8 = 0x41;
pub const TAG_GAUGE32: u8 = 0x42;
pub const TAG_TIMETICKS: u8 = 0x43;
pub const TAG_NO_SUCH_OBJECT: u8 = 0x80;
pub const TAG_NO_SUCH_INSTANCE: u8 = 0x81;
pub const TAG_END_OF_MIB_VIEW: u8 = 0x82;

pub fn push_length(out: &mut Vec<u8>, len: usize) {
    if len < 0x80 {
        out.push(len as u8);
    } else {
        let bytes = len.to_be_bytes();
        let skip = bytes.iter().take_while(|&&b| b == 0).count();
        out.push(0x80 | (bytes.len() - skip) as u8);
        out.extend_from_slice(&bytes[skip..]);
    }
}

pub fn push_tlv(out: &mut Vec<u8>, tag: u8, contents: &[u8]) {
    out.push(tag);
    push_length(out, contents.len());
    out.extend_from_slice(contents);
}

/// Minimal two's-complement big-endian encoding.
pub fn integer_contents(v: i64) -> Vec<u8> {
    let bytes = v.to_be_bytes();
    let mut start = 0;
    while start < 7 {
        let (b, next) = (bytes[start], bytes[start + 1]);
        if (b == 0x00 && next & 0x80 == 0) || (b == 0xFF && next & 0x80 != 0) {
            start += 1;
        } else {
            break;
        }
    }
    bytes[start..].to_vec()
}

/// Unsigned encoding with a leading zero when the top bit would be set.
pub fn unsigned_contents(v: u32) -> Vec<u8> {
    integer_contents(i64::from(v))
}

fn push_base128(out: &mut Vec<u8>, mut v: u64) {
    let mut tmp = [0u8; 10];
    let mut i = tmp.len();
    loop {
        i -= 1;
        tmp[i] = (v & 0x7F) as u8;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    let last = tmp.len() - 1;
    for (k, b) in tmp[i..].iter().enumerate() {
        out.push(if i + k == last { *b } else { b | 0x80 });
    }
}

/// First two arcs fold into 40*X + Y; every subidentifier is base-128
/// with the high bit marking continuation.
pub fn oid_contents(oid: &Oid) -> Vec<u8> {
    let arcs = oid.arcs();
    let mut out = Vec::with_capacity(arcs.len() + 2);
    push_base128(&mut out, u64::from(arcs[0]) * 40 + u64::from(arcs[1]));
    for &a in &arcs[2..] {
        push_base128(&mut out, u64::from(a));
    }
    out
}

pub fn push_value(out: &mut Vec<u8>, v: &Value) {
    match v {
        Value::Integer(i) => push_tlv(out, TAG_INTEGER, &integer_contents(*i)),
        Value::OctetString(s) => push_tlv(out, TAG_OCTET_STRING, s),
        Value::Null => push_tlv(out, TAG_NULL, &[]),
        Value::Counter32(c) => push_tlv(out, TAG_COUNTER32, &unsigned_contents(*c)),
        Value::Gauge32(c) => push_tlv(out, TAG_GAUGE32, &unsigned_contents(*c)),
        Value::TimeTicks(c) => push_tlv(out, TAG_TIMETICKS, &unsigned_contents(*c)),
        Value::NoSuchObject => push_tlv(out, TAG_NO_SUCH_OBJECT, &[]),
        Value::NoSuchInstance => push_tlv(out, TAG_NO_SUCH_INSTANCE, &[]),
        Value::EndOfMibView => push_tlv(out, TAG_END_OF_MIB_VIEW, &[]),
    }
}

/// Reads TLVs from a byte slice, tracking the absolute offset for errors.
#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0, base: 0 }
    }

    pub fn offset(&self) -> usize {
        self.base + self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn err(&self, reason: impl Into<String>) -> SnmpError {
        SnmpError::Decode {
            offset: self.offset(),
            reason: reason.into(),
        }
    }

    fn byte(&mut self) -> Result<u8, SnmpError> {
        let b = *self.buf.get(self.pos).ok_or_else(|| self.err("unexpected end of data"))?;
        self.pos += 1;
        Ok(b)
    }

    fn length(&mut self) -> Result<usize, SnmpError> {
        let first = self.byte()?;
        if first < 0x80 {
            return Ok(first as usize);
        }
        let n = (first & 0x7F) as usize;
        if n == 0 {
            return Err(self.err("indefinite length not supported"));
        }
        if n > 4 {
            return Err(self.err("length field too long"));
        }
        let mut len = 0usize;
        for _ in 0..n {
            len = (len << 8) | self.byte()? as usize;
        }
        Ok(len)
    }

    /// Next TLV: its tag and a reader over its contents.
    pub fn tlv(&mut self) -> Result<(u8, Reader<'a>), SnmpError> {
        let tag = self.byte()?;
        let len = self.length()?;
        let start = self.pos;
        if self.buf.len() - start < len {
            return Err(self.err(format!("length {len} runs past end of data")));
        }
        self.pos += len;
        Ok((
            tag,
            Reader {
                buf: &self.buf[start..start + len],
                pos: 0,
                base: self.base + start,
            },
        ))
    }

    pub fn expect(&mut self, want: u8) -> Result<Reader<'a>, SnmpError> {
        let at = self.offset();
        let (tag, inner) = self.tlv()?;
        if tag != want {
            return Err(SnmpError::Decode {
                offset: at,
                reason: format!("expected tag 0x{want:02x}, found 0x{tag:02x}"),
            });
        }
        Ok(inner)
    }

    pub fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn finish(&self) -> Result<(), SnmpError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self.err("trailing bytes"))
        }
    }

    pub fn integer(&mut self) -> Result<i64, SnmpError> {
        let inner = self.expect(TAG_INTEGER)?;
        decode_integer(&inner)
    }

    pub fn value(&mut self) -> Result<Value, SnmpError> {
        let at = self.offset();
        let (tag, inner) = self.tlv()?;
        let bytes = inner.rest();
        let empty = |v: Value| {
            if bytes.is_empty() {
                Ok(v)
            } else {
                Err(SnmpError::Decode {
                    offset: at,
                    reason: "expected empty contents".into(),
                })
            }
        };
        match tag {
            TAG_INTEGER => Ok(Value::Integer(decode_integer(&inner)?)),
            TAG_OCTET_STRING => Ok(Value::OctetString(bytes.to_vec())),
            TAG_NULL => empty(Value::Null),
            TAG_COUNTER32 => Ok(Value::Counter32(decode_unsigned(&inner)?)),
            TAG_GAUGE32 => Ok(Value::Gauge32(decode_unsigned(&inner)?)),
            TAG_TIMETICKS => Ok(Value::TimeTicks(decode_unsigned(&inner)?)),
            TAG_NO_SUCH_OBJECT => empty(Value::NoSuchObject),
            TAG_NO_SUCH_INSTANCE => empty(Value::NoSuchInstance),
            TAG_END_OF_MIB_VIEW => empty(Value::EndOfMibView),
            other => Err(SnmpError::Decode {
                offset: at,
                reason: format!("unsupported value tag 0x{other:02x}"),
            }),
        }
    }

    pub fn oid(&mut self) -> Result<Oid, SnmpError> {
        let inner = self.expect(TAG_OID)?;
        decode_oid(&inner)
    }
}

fn decode_integer(r: &Reader<'_>) -> Result<i64, SnmpError> {
    let bytes = r.rest();
    if bytes.is_empty() || bytes.len() > 8 {
        return Err(r.err(format!("integer of {} bytes", bytes.len())));
    }
    let mut v: i64 = if bytes[0] & 0x80 != 0 { -1 } else { 0 };
    for &b in bytes {
        v = (v << 8) | i64::from(b);
    }
    Ok(v)
}

fn decode_unsigned(r: &Reader<'_>) -> Result<u32, SnmpError> {
    let bytes = r.rest();
    if bytes.is_empty() || bytes.len() > 5 || (bytes.len() == 5 && bytes[0] != 0) {
        return Err(r.err("unsigned32 out of range"));
    }
    let mut v: u64 = 0;
    for &b in bytes {
        v = (v << 8) | u64::from(b);
    }
    u32::try_from(v).map_err(|_| r.err("unsigned32 out of range"))
}

fn decode_oid(r: &Reader<'_>) -> Result<Oid, SnmpError> {
    let bytes = r.rest();
    if bytes.is_empty() {
        return Err(r.err("empty object identifier"));
    }
    let mut subids = Vec::new();
    let mut acc: u64 = 0;
    let mut pending = false;
    for &b in bytes {
        if !pending && b == 0x80 {
            return Err(r.err("non-minimal subidentifier"));
        }
        acc = (acc << 7) | u64::from(b & 0x7F);
        if acc > u64::from(u32::MAX) + 80 {
            return Err(r.err("subidentifier overflow"));
        }
        if b & 0x80 != 0 {
            pending = true;
        } else {
            subids.push(acc);
            acc = 0;
            pending = false;
        }
    }
    if pending {
        return Err(r.err("truncated subidentifier"));
    }
    let first = subids[0];
    let (x, y) = match first {
        0..=39 => (0, first),
        40..=79 => (1, first - 40),
        _ => (2, first - 80),
    };
    let mut arcs = Vec::with_capacity(subids.len() + 1);
    arcs.push(x as u32);
    arcs.push(u32::try_from(y).map_err(|_| r.err("subidentifier overflow"))?);
    for &s in &subids[1..] {
        arcs.push(u32::try_from(s).map_err(|_| r.err("subidentifier overflow"))?);
    }
    Oid::new(arcs).map_err(|e| r.err(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_minimal_forms() {
        assert_eq!(integer_contents(0), vec![0x00]);
        assert_eq!(integer_contents(127), vec![0x7F]);
        assert_eq!(integer_contents(128), vec![0x00, 0x80]);
        assert_eq!(integer_contents(-1), vec![0xFF]);
        assert_eq!(integer_contents(-129), vec![0xFF, 0x7F]);
        assert_eq!(unsigned_contents(u32::MAX), vec![0x00, 0xFF, 0xFF, 0xFF, 0xFF]);
    }

    #[test]
    fn long_lengths() {
        let mut v = Vec::new();
        push_length(&mut v, 200);
        assert_eq!(v, vec![0x81, 200]);
        v.clear();
        push_length(&mut v, 0x1234);
        assert_eq!(v, vec![0x82, 0x12, 0x34]);
    }

    #[test]
    fn base128_arc() {
        let oid = Oid::new(vec![1, 3, 17895]).unwrap();
        assert_eq!(oid_contents(&oid), vec![0x2B, 0x81, 0x8B, 0x67]);
    }

    #[test]
    fn truncated_input_reports_offset() {
        let mut r = Reader::new(&[0x30, 0x05, 0x02, 0x01]);
        match r.tlv() {
            Err(SnmpError::Decode { offset, .. }) => assert_eq!(offset, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indefinite_length_rejected() {
        let mut r = Reader::new(&[0x30, 0x80, 0x00, 0x00]);
        assert!(r.tlv().is_err());
    }
}
