//! DNS-injection probing.
//!
//! A hostname is declared censored when a DNS query sent to an address
//! inside the censored network that runs no DNS service nonetheless draws
//! a response. The submodules split that into wire codec, a pure verdict
//! engine, the UDP prober itself, and an in-process simulated censor used
//! for tests and offline runs.

pub mod prober;
pub mod sim;
pub mod verdict;
pub mod wire;

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prober::{ProbeSettings, Prober};
pub use verdict::{evaluate_stream, EvidenceRecord, RawResponse, StreamVerdict};
pub use wire::{decode_query, decode_response, encode_query, DnsQuestion, ResponseClass};

/// Default DNS port for probe targets.
pub const DEFAULT_DNS_PORT: u16 = 53;

/// An address inside the censored network used as a probe destination.
/// Only targets that passed the control check this session may back a
/// verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeTarget {
    pub address: IpAddr,
    pub port: u16,
    pub validated: bool,
}

impl ProbeTarget {
    pub fn new(address: IpAddr, port: u16) -> Self {
        ProbeTarget {
            address,
            port,
            validated: false,
        }
    }

    pub fn socket_addr(&self) -> SocketAddr {
        SocketAddr::new(self.address, self.port)
    }
}

#[derive(Debug, Error)]
pub enum TargetParseError {
    #[error("line {line}: {text:?} is not an ip or ip:port")]
    BadLine { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses one `ip[:port]` target line.
pub fn parse_target(text: &str) -> Option<ProbeTarget> {
    let text = text.trim();
    if let Ok(addr) = text.parse::<SocketAddr>() {
        return Some(ProbeTarget::new(addr.ip(), addr.port()));
    }
    if let Ok(ip) = text.parse::<IpAddr>() {
        return Some(ProbeTarget::new(ip, DEFAULT_DNS_PORT));
    }
    None
}

/// Loads a target list file: one `ip[:port]` per line, `#` comments ignored.
pub fn load_targets(path: &Path) -> Result<Vec<ProbeTarget>, TargetParseError> {
    let text = std::fs::read_to_string(path)?;
    let mut targets = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_target(line) {
            Some(t) => targets.push(t),
            None => {
                return Err(TargetParseError::BadLine {
                    line: idx + 1,
                    text: line.to_string(),
                })
            }
        }
    }
    Ok(targets)
}

/// Per-host classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Censored,
    NotCensored,
    Inconclusive,
}

/// The outcome and evidence of one hostname's injection test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub host: String,
    pub verdict: Verdict,
    /// Count of responses that matched the probe's txid and question.
    pub responses_seen: u64,
    pub trials: u32,
    pub evidence: Vec<EvidenceRecord>,
}

impl ProbeOutcome {
    pub fn inconclusive(host: &str) -> Self {
        ProbeOutcome {
            host: host.to_string(),
            verdict: Verdict::Inconclusive,
            responses_seen: 0,
            trials: 0,
            evidence: Vec::new(),
        }
    }

    pub fn is_censored(&self) -> bool {
        self.verdict == Verdict::Censored
    }
}

/// One verdict per hostname per run. Concurrent reads, serialized inserts.
#[derive(Debug, Default)]
pub struct VerdictCache {
    inner: RwLock<HashMap<String, ProbeOutcome>>,
}

impl VerdictCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, host: &str) -> Option<ProbeOutcome> {
        self.inner.read().expect("verdict cache poisoned").get(host).cloned()
    }

    pub fn insert(&self, outcome: ProbeOutcome) {
        self.inner
            .write()
            .expect("verdict cache poisoned")
            .insert(outcome.host.clone(), outcome);
    }

    pub fn contains(&self, host: &str) -> bool {
        self.inner.read().expect("verdict cache poisoned").contains_key(host)
    }

    /// Fetch the cached verdict or compute one with `probe` and cache it.
    pub fn get_or_probe(
        &self,
        host: &str,
        probe: impl FnOnce(&str) -> ProbeOutcome,
    ) -> ProbeOutcome {
        if let Some(hit) = self.get(host) {
            return hit;
        }
        let outcome = probe(host);
        self.insert(outcome.clone());
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bare_ip_with_default_port() {
        let t = parse_target("203.0.113.9").unwrap();
        assert_eq!(t.port, DEFAULT_DNS_PORT);
        assert!(!t.validated);
    }

    #[test]
    fn parses_ip_port() {
        let t = parse_target("203.0.113.9:5353").unwrap();
        assert_eq!(t.socket_addr(), "203.0.113.9:5353".parse().unwrap());
    }

    #[test]
    fn rejects_garbage_line() {
        assert!(parse_target("not-an-ip").is_none());
    }

    #[test]
    fn verdict_cache_probes_once() {
        let cache = VerdictCache::new();
        let mut calls = 0;
        for _ in 0..3 {
            cache.get_or_probe("h.example", |h| {
                calls += 1;
                ProbeOutcome::inconclusive(h)
            });
        }
        assert_eq!(calls, 1);
    }
}
