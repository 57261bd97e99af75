//! DNS wire format (RFC 1035, UDP): query encoding and response decoding.
//!
//! The prober only ever sends A/IN questions and only trusts responses that
//! echo the outstanding question bit-for-bit (modulo name case), so this is
//! deliberately a small subset of the protocol: no EDNS, no TCP, no record
//! types beyond A.

use std::net::Ipv4Addr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Record type A.
pub const QTYPE_A: u16 = 1;
/// Class IN.
pub const QCLASS_IN: u16 = 1;

/// Longest wire-encoded name: length octets + labels + root byte.
const MAX_NAME_WIRE_LEN: usize = 255;
const MAX_LABEL_LEN: usize = 63;
const HEADER_LEN: usize = 12;

/// One outstanding probe question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsQuestion {
    /// Hostname in presentation form, no trailing dot.
    pub qname: String,
    pub qtype: u16,
    pub qclass: u16,
    pub txid: u16,
}

impl DnsQuestion {
    /// An A/IN question for `qname` with the given transaction id.
    pub fn a_record(qname: &str, txid: u16) -> Self {
        DnsQuestion {
            qname: qname.trim_end_matches('.').to_ascii_lowercase(),
            qtype: QTYPE_A,
            qclass: QCLASS_IN,
            txid,
        }
    }

    /// An A/IN question with a uniformly random transaction id.
    pub fn a_record_random_txid(qname: &str) -> Self {
        Self::a_record(qname, rand::thread_rng().gen())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("label longer than 63 bytes in {0:?}")]
    LabelTooLong(String),
    #[error("empty label in {0:?}")]
    EmptyLabel(String),
    #[error("encoded name for {0:?} exceeds 255 bytes")]
    NameTooLong(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("datagram shorter than the 12-byte header")]
    Truncated,
    #[error("name runs past the end of the datagram")]
    NameOverrun,
    #[error("bad compression pointer")]
    BadPointer,
    #[error("record data runs past the end of the datagram")]
    RecordOverrun,
}

/// Why a syntactically valid DNS message was not counted as an answer to
/// the probe. Spoof noise on the path lands here instead of erroring out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnrelatedReason {
    /// QR flag says query, not response.
    NotAResponse,
    TxidMismatch,
    QuestionMismatch,
}

/// A response that matched the probe's txid and question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub txid: u16,
    pub qname: String,
    /// A-record addresses found in the answer section.
    pub answers: Vec<Ipv4Addr>,
}

/// Classification of an inbound datagram against the outstanding question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseClass {
    Match(ParsedResponse),
    Unrelated(UnrelatedReason),
}

/// Encodes a query message: 12-byte header (QR=0, RD=0, QDCOUNT=1) followed
/// by the question section. Deterministic given the txid.
pub fn encode_query(q: &DnsQuestion) -> Result<Vec<u8>, EncodeError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + q.qname.len() + 6);
    buf.extend_from_slice(&q.txid.to_be_bytes());
    buf.extend_from_slice(&[0, 0]); // flags: QR=0, opcode=0, RD=0
    buf.extend_from_slice(&1u16.to_be_bytes()); // QDCOUNT
    buf.extend_from_slice(&[0, 0, 0, 0, 0, 0]); // ANCOUNT, NSCOUNT, ARCOUNT
    encode_name(&q.qname, &mut buf)?;
    buf.extend_from_slice(&q.qtype.to_be_bytes());
    buf.extend_from_slice(&q.qclass.to_be_bytes());
    Ok(buf)
}

fn encode_name(name: &str, buf: &mut Vec<u8>) -> Result<(), EncodeError> {
    let name = name.trim_end_matches('.');
    if name.is_empty() {
        return Err(EncodeError::EmptyLabel(name.to_string()));
    }
    let mut wire_len = 1; // terminal root byte
    for label in name.split('.') {
        if label.is_empty() {
            return Err(EncodeError::EmptyLabel(name.to_string()));
        }
        if label.len() > MAX_LABEL_LEN {
            return Err(EncodeError::LabelTooLong(name.to_string()));
        }
        wire_len += 1 + label.len();
        if wire_len > MAX_NAME_WIRE_LEN {
            return Err(EncodeError::NameTooLong(name.to_string()));
        }
        buf.push(label.len() as u8);
        buf.extend_from_slice(label.as_bytes());
    }
    buf.push(0);
    Ok(())
}

/// Classifies `bytes` against the probe's outstanding question.
///
/// Accepts only messages with QR=1, a matching txid, and a question section
/// equal to the probe's (name compared case-insensitively); anything else
/// parseable is `Unrelated`. A-record answers are extracted on match.
/// Truncated or garbled packets are a `DecodeError` — counted by the
/// caller, never fatal.
pub fn decode_response(bytes: &[u8], expected: &DnsQuestion) -> Result<ResponseClass, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated);
    }
    let txid = u16::from_be_bytes([bytes[0], bytes[1]]);
    let flags = u16::from_be_bytes([bytes[2], bytes[3]]);
    let qdcount = u16::from_be_bytes([bytes[4], bytes[5]]);
    let ancount = u16::from_be_bytes([bytes[6], bytes[7]]);

    if flags & 0x8000 == 0 {
        return Ok(ResponseClass::Unrelated(UnrelatedReason::NotAResponse));
    }
    if txid != expected.txid {
        return Ok(ResponseClass::Unrelated(UnrelatedReason::TxidMismatch));
    }
    if qdcount == 0 {
        return Ok(ResponseClass::Unrelated(UnrelatedReason::QuestionMismatch));
    }

    let mut pos = HEADER_LEN;
    let (qname, next) = read_name(bytes, pos)?;
    pos = next;
    if pos + 4 > bytes.len() {
        return Err(DecodeError::Truncated);
    }
    let qtype = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]);
    let qclass = u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]);
    pos += 4;

    if !qname.eq_ignore_ascii_case(&expected.qname)
        || qtype != expected.qtype
        || qclass != expected.qclass
    {
        return Ok(ResponseClass::Unrelated(UnrelatedReason::QuestionMismatch));
    }

    // Skip any further questions before the answer section.
    for _ in 1..qdcount {
        let (_, next) = read_name(bytes, pos)?;
        pos = next + 4;
        if pos > bytes.len() {
            return Err(DecodeError::Truncated);
        }
    }

    let mut answers = Vec::new();
    for _ in 0..ancount {
        let (_, next) = read_name(bytes, pos)?;
        pos = next;
        if pos + 10 > bytes.len() {
            return Err(DecodeError::Truncated);
        }
        let rtype = u16::from_be_bytes([bytes[pos], bytes[pos + 1]]);
        let rclass = u16::from_be_bytes([bytes[pos + 2], bytes[pos + 3]]);
        let rdlen = u16::from_be_bytes([bytes[pos + 8], bytes[pos + 9]]) as usize;
        pos += 10;
        if pos + rdlen > bytes.len() {
            return Err(DecodeError::RecordOverrun);
        }
        if rtype == QTYPE_A && rclass == QCLASS_IN && rdlen == 4 {
            answers.push(Ipv4Addr::new(
                bytes[pos],
                bytes[pos + 1],
                bytes[pos + 2],
                bytes[pos + 3],
            ));
        }
        pos += rdlen;
    }

    Ok(ResponseClass::Match(ParsedResponse {
        txid,
        qname,
        answers,
    }))
}

/// Parses a query message (QR=0) into its first question. Used by the
/// simulated censor to decide whether to inject.
pub fn decode_query(bytes: &[u8]) -> Result<DnsQuestion, DecodeError> {
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::Truncated);
    }
    let txid = u16::from_be_bytes([bytes[0], bytes[1]]);
    let qdcount = u16::from_be_bytes([bytes[4], bytes[5]]);
    if qdcount == 0 {
        return Err(DecodeError::Truncated);
    }
    let (qname, next) = read_name(bytes, HEADER_LEN)?;
    if next + 4 > bytes.len() {
        return Err(DecodeError::Truncated);
    }
    let qtype = u16::from_be_bytes([bytes[next], bytes[next + 1]]);
    let qclass = u16::from_be_bytes([bytes[next + 2], bytes[next + 3]]);
    Ok(DnsQuestion {
        qname,
        qtype,
        qclass,
        txid,
    })
}

/// Reads a possibly-compressed name starting at `pos`. Returns the name in
/// lowercase presentation form and the offset just past it. Pointers must
/// strictly decrease to rule out loops.
fn read_name(bytes: &[u8], start: usize) -> Result<(String, usize), DecodeError> {
    let mut name = String::new();
    let mut pos = start;
    let mut end: Option<usize> = None;
    let mut min_pointer = start;

    loop {
        let len = *bytes.get(pos).ok_or(DecodeError::NameOverrun)? as usize;
        if len == 0 {
            pos += 1;
            break;
        }
        if len & 0xC0 == 0xC0 {
            let low = *bytes.get(pos + 1).ok_or(DecodeError::NameOverrun)? as usize;
            let target = ((len & 0x3F) << 8) | low;
            if target >= min_pointer {
                return Err(DecodeError::BadPointer);
            }
            if end.is_none() {
                end = Some(pos + 2);
            }
            min_pointer = target;
            pos = target;
            continue;
        }
        if len & 0xC0 != 0 {
            // 0x40/0x80 label types are obsolete; treat as garbage.
            return Err(DecodeError::BadPointer);
        }
        let label = bytes
            .get(pos + 1..pos + 1 + len)
            .ok_or(DecodeError::NameOverrun)?;
        if !name.is_empty() {
            name.push('.');
        }
        for &b in label {
            name.push(b.to_ascii_lowercase() as char);
        }
        pos += 1 + len;
    }

    Ok((name, end.unwrap_or(pos)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_example_com_exactly() {
        let q = DnsQuestion::a_record("example.com", 0x1234);
        let bytes = encode_query(&q).unwrap();
        #[rustfmt::skip]
        let expected: Vec<u8> = vec![
            0x12, 0x34, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
            7, b'e', b'x', b'a', b'm', b'p', b'l', b'e',
            3, b'c', b'o', b'm',
            0,
            0x00, 0x01, 0x00, 0x01,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_oversize_label() {
        let label = "a".repeat(64);
        let q = DnsQuestion::a_record(&format!("{label}.com"), 1);
        assert!(matches!(
            encode_query(&q),
            Err(EncodeError::LabelTooLong(_))
        ));
    }

    #[test]
    fn rejects_oversize_name() {
        let name = (0..5).map(|_| "a".repeat(60)).collect::<Vec<_>>().join(".");
        let q = DnsQuestion::a_record(&name, 1);
        assert!(matches!(encode_query(&q), Err(EncodeError::NameTooLong(_))));
    }

    #[test]
    fn rejects_empty_label() {
        let q = DnsQuestion::a_record("bad..name", 1);
        assert!(matches!(encode_query(&q), Err(EncodeError::EmptyLabel(_))));
    }

    #[test]
    fn query_with_qr_flipped_round_trips() {
        let q = DnsQuestion::a_record("example.com", 0x1234);
        let mut bytes = encode_query(&q).unwrap();
        bytes[2] |= 0x80;
        match decode_response(&bytes, &q).unwrap() {
            ResponseClass::Match(r) => {
                assert_eq!(r.txid, 0x1234);
                assert_eq!(r.qname, "example.com");
                assert!(r.answers.is_empty());
            }
            other => panic!("expected match, got {other:?}"),
        }
    }

    #[test]
    fn wrong_txid_is_unrelated() {
        let q = DnsQuestion::a_record("example.com", 0x1234);
        let mut bytes = encode_query(&q).unwrap();
        bytes[2] |= 0x80;
        bytes[0] ^= 0xFF;
        assert_eq!(
            decode_response(&bytes, &q).unwrap(),
            ResponseClass::Unrelated(UnrelatedReason::TxidMismatch)
        );
    }

    #[test]
    fn query_datagram_is_not_a_response() {
        let q = DnsQuestion::a_record("example.com", 7);
        let bytes = encode_query(&q).unwrap();
        assert_eq!(
            decode_response(&bytes, &q).unwrap(),
            ResponseClass::Unrelated(UnrelatedReason::NotAResponse)
        );
    }

    #[test]
    fn wrong_question_is_unrelated() {
        let ours = DnsQuestion::a_record("example.com", 9);
        let theirs = DnsQuestion::a_record("other.example", 9);
        let mut bytes = encode_query(&theirs).unwrap();
        bytes[2] |= 0x80;
        assert_eq!(
            decode_response(&bytes, &ours).unwrap(),
            ResponseClass::Unrelated(UnrelatedReason::QuestionMismatch)
        );
    }

    #[test]
    fn name_compare_is_case_insensitive() {
        let ours = DnsQuestion::a_record("example.com", 9);
        let mut shouting = DnsQuestion::a_record("example.com", 9);
        shouting.qname = "EXAMPLE.COM".to_string();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&9u16.to_be_bytes());
        bytes.extend_from_slice(&[0x80, 0, 0, 1, 0, 0, 0, 0, 0, 0]);
        encode_name("EXAMPLE.COM", &mut bytes).unwrap();
        bytes.extend_from_slice(&QTYPE_A.to_be_bytes());
        bytes.extend_from_slice(&QCLASS_IN.to_be_bytes());
        assert!(matches!(
            decode_response(&bytes, &ours).unwrap(),
            ResponseClass::Match(_)
        ));
    }

    #[test]
    fn five_byte_datagram_is_truncated() {
        let q = DnsQuestion::a_record("example.com", 1);
        assert_eq!(
            decode_response(&[0, 1, 0x80, 0, 0], &q),
            Err(DecodeError::Truncated)
        );
    }

    #[test]
    fn answers_with_compression_pointer_decode() {
        let q = DnsQuestion::a_record("example.com", 0xBEEF);
        let mut bytes = encode_query(&q).unwrap();
        bytes[2] |= 0x80;
        bytes[7] = 1; // ANCOUNT = 1
        bytes.extend_from_slice(&[0xC0, 0x0C]); // pointer to the question name
        bytes.extend_from_slice(&QTYPE_A.to_be_bytes());
        bytes.extend_from_slice(&QCLASS_IN.to_be_bytes());
        bytes.extend_from_slice(&300u32.to_be_bytes());
        bytes.extend_from_slice(&4u16.to_be_bytes());
        bytes.extend_from_slice(&[203, 0, 113, 7]);
        match decode_response(&bytes, &q).unwrap() {
            ResponseClass::Match(r) => {
                assert_eq!(r.answers, vec![Ipv4Addr::new(203, 0, 113, 7)])
            }
            other => panic!("expected match, got {other:?}"),
        }
    }

    #[test]
    fn pointer_loop_is_rejected() {
        let mut bytes = vec![0u8; 12];
        bytes[0] = 0;
        bytes[1] = 5;
        bytes[2] = 0x80;
        bytes[5] = 1; // QDCOUNT
        bytes.extend_from_slice(&[0xC0, 0x0C]); // points at itself
        bytes.extend_from_slice(&[0, 1, 0, 1]);
        let q = DnsQuestion::a_record("example.com", 5);
        assert_eq!(decode_response(&bytes, &q), Err(DecodeError::BadPointer));
    }
}
