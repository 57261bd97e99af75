//! Turns a stream of raw datagrams into a censorship verdict.
//!
//! The inference rule: a host is censored iff at least one response with
//! QR=1, a matching txid, and a matching question section arrives at an
//! address that runs no DNS service. Everything else — spoof noise, stray
//! traffic, garbage — must not produce a verdict.

use std::net::{Ipv4Addr, SocketAddr};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::wire::{decode_response, DnsQuestion, ResponseClass};

/// One datagram collected while a probe was outstanding.
#[derive(Debug, Clone)]
pub struct RawResponse {
    pub source: SocketAddr,
    pub bytes: Vec<u8>,
    pub rtt: Duration,
}

/// What a collected datagram turned out to be, kept as probe evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub target: SocketAddr,
    /// Whether the datagram's txid equalled the probe's txid.
    pub txid_matched: bool,
    /// A-record addresses, present only for fully matching responses.
    pub answer_ips: Vec<Ipv4Addr>,
    pub rtt: Duration,
}

/// Verdict over one collected stream.
#[derive(Debug, Clone, Default)]
pub struct StreamVerdict {
    /// Count of fully matching responses (txid + question + QR=1).
    pub matching: u64,
    /// Count of datagrams that failed to parse at all.
    pub decode_errors: u64,
    pub evidence: Vec<EvidenceRecord>,
}

impl StreamVerdict {
    pub fn censored(&self) -> bool {
        self.matching > 0
    }
}

/// Evaluates every datagram in `responses` against `expected`.
///
/// Pure: the verdict is a function of the question and the byte streams
/// alone, so it can be checked exhaustively over synthetic streams.
pub fn evaluate_stream(expected: &DnsQuestion, responses: &[RawResponse]) -> StreamVerdict {
    let mut verdict = StreamVerdict::default();
    for r in responses {
        verdict.absorb(expected, r);
    }
    verdict
}

impl StreamVerdict {
    /// Folds one datagram into the verdict. Returns true when the datagram
    /// fully matched the probe.
    pub fn absorb(&mut self, expected: &DnsQuestion, response: &RawResponse) -> bool {
        match decode_response(&response.bytes, expected) {
            Ok(ResponseClass::Match(parsed)) => {
                self.matching += 1;
                self.evidence.push(EvidenceRecord {
                    target: response.source,
                    txid_matched: true,
                    answer_ips: parsed.answers,
                    rtt: response.rtt,
                });
                true
            }
            Ok(ResponseClass::Unrelated(_)) => {
                let txid_matched = response.bytes.len() >= 2
                    && u16::from_be_bytes([response.bytes[0], response.bytes[1]])
                        == expected.txid;
                self.evidence.push(EvidenceRecord {
                    target: response.source,
                    txid_matched,
                    answer_ips: Vec::new(),
                    rtt: response.rtt,
                });
                false
            }
            Err(_) => {
                self.decode_errors += 1;
                self.evidence.push(EvidenceRecord {
                    target: response.source,
                    txid_matched: false,
                    answer_ips: Vec::new(),
                    rtt: response.rtt,
                });
                false
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::wire::encode_query;

    fn raw(bytes: Vec<u8>) -> RawResponse {
        RawResponse {
            source: "192.0.2.1:53".parse().unwrap(),
            bytes,
            rtt: Duration::from_millis(12),
        }
    }

    #[test]
    fn empty_stream_is_not_censored() {
        let q = DnsQuestion::a_record("example.com", 42);
        assert!(!evaluate_stream(&q, &[]).censored());
    }

    #[test]
    fn only_mismatching_txids_is_not_censored() {
        let q = DnsQuestion::a_record("example.com", 42);
        let mut spoof = encode_query(&DnsQuestion::a_record("example.com", 43)).unwrap();
        spoof[2] |= 0x80;
        let verdict = evaluate_stream(&q, &[raw(spoof.clone()), raw(spoof)]);
        assert!(!verdict.censored());
        assert_eq!(verdict.matching, 0);
        assert_eq!(verdict.evidence.len(), 2);
        assert!(verdict.evidence.iter().all(|e| !e.txid_matched));
    }

    #[test]
    fn one_matching_response_among_noise_is_censored() {
        let q = DnsQuestion::a_record("example.com", 42);
        let mut good = encode_query(&q).unwrap();
        good[2] |= 0x80;
        let mut bad_txid = encode_query(&DnsQuestion::a_record("example.com", 1)).unwrap();
        bad_txid[2] |= 0x80;
        let verdict = evaluate_stream(
            &q,
            &[raw(vec![1, 2, 3]), raw(bad_txid), raw(good)],
        );
        assert!(verdict.censored());
        assert_eq!(verdict.matching, 1);
        assert_eq!(verdict.decode_errors, 1);
    }
}
