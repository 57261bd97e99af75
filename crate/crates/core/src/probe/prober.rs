//! The UDP prober: sends questions at probe targets and collects whatever
//! comes back until the wait window closes.

use std::io;
use std::net::UdpSocket;
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::verdict::{RawResponse, StreamVerdict};
use super::wire::{encode_query, DnsQuestion};
use super::{ProbeOutcome, ProbeTarget, Verdict};

/// Knobs for one probe session. Multiple trials guard against packet loss
/// producing a false NotCensored.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub trials: u32,
    pub wait: Duration,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            trials: 3,
            wait: Duration::from_secs(2),
        }
    }
}

/// Probes hostnames against a fixed target set. Each probe owns its socket,
/// so `&self` probes may run concurrently from multiple threads.
#[derive(Debug, Clone)]
pub struct Prober {
    targets: Vec<ProbeTarget>,
    settings: ProbeSettings,
}

impl Prober {
    pub fn new(targets: Vec<ProbeTarget>, settings: ProbeSettings) -> Self {
        Prober { targets, settings }
    }

    pub fn settings(&self) -> ProbeSettings {
        self.settings
    }

    pub fn targets(&self) -> &[ProbeTarget] {
        &self.targets
    }

    pub fn validated_count(&self) -> usize {
        self.targets.iter().filter(|t| t.validated).count()
    }

    /// Runs the control check against every target: a target is usable only
    /// if the control query draws total silence. A response means the target
    /// answers DNS (or the control host is itself censored) — either way it
    /// cannot back a verdict. Returns how many targets validated.
    pub fn validate_targets(&mut self, control_host: &str) -> usize {
        for i in 0..self.targets.len() {
            let target = self.targets[i];
            let ok = validate_target(&target, control_host, self.settings);
            self.targets[i].validated = ok;
            if !ok {
                warn!(
                    "probe target {} failed control check against {control_host}; disabled",
                    target.socket_addr()
                );
            }
        }
        self.validated_count()
    }

    /// Tests one hostname. Sends `trials` queries (fresh random txid each)
    /// to every validated target; the first fully matching response decides
    /// Censored, silence across all trials decides NotCensored, and a
    /// missing precondition (no validated target, socket trouble, an
    /// unencodable name) decides Inconclusive.
    pub fn probe_host(&self, host: &str) -> ProbeOutcome {
        let validated: Vec<&ProbeTarget> =
            self.targets.iter().filter(|t| t.validated).collect();
        if validated.is_empty() || self.settings.trials == 0 {
            return ProbeOutcome::inconclusive(host);
        }

        let mut stream = StreamVerdict::default();
        let mut trials_done = 0u32;

        for _ in 0..self.settings.trials {
            let question = DnsQuestion::a_record_random_txid(host);
            let encoded = match encode_query(&question) {
                Ok(b) => b,
                Err(err) => {
                    debug!("cannot encode probe for {host}: {err}");
                    return ProbeOutcome::inconclusive(host);
                }
            };
            let socket = match bind_probe_socket() {
                Ok(s) => s,
                Err(err) => {
                    warn!("probe socket for {host}: {err}");
                    return inconclusive_with(host, stream, trials_done);
                }
            };
            for target in &validated {
                if let Err(err) = socket.send_to(&encoded, target.socket_addr()) {
                    warn!("probe send to {} failed: {err}", target.socket_addr());
                    return inconclusive_with(host, stream, trials_done);
                }
            }
            trials_done += 1;

            let matched = collect_window(&socket, &question, self.settings.wait, &mut stream);
            if matched {
                return ProbeOutcome {
                    host: host.to_string(),
                    verdict: Verdict::Censored,
                    responses_seen: stream.matching,
                    trials: trials_done,
                    evidence: stream.evidence,
                };
            }
        }

        ProbeOutcome {
            host: host.to_string(),
            verdict: Verdict::NotCensored,
            responses_seen: stream.matching,
            trials: trials_done,
            evidence: stream.evidence,
        }
    }
}

fn inconclusive_with(host: &str, stream: StreamVerdict, trials: u32) -> ProbeOutcome {
    ProbeOutcome {
        host: host.to_string(),
        verdict: Verdict::Inconclusive,
        responses_seen: stream.matching,
        trials,
        evidence: stream.evidence,
    }
}

/// Sends the control query `trials` times; the target validates only if
/// zero datagrams arrive across every wait window.
pub fn validate_target(
    target: &ProbeTarget,
    control_host: &str,
    settings: ProbeSettings,
) -> bool {
    let question = DnsQuestion::a_record_random_txid(control_host);
    let encoded = match encode_query(&question) {
        Ok(b) => b,
        Err(_) => return false,
    };
    for _ in 0..settings.trials.max(1) {
        let socket = match bind_probe_socket() {
            Ok(s) => s,
            Err(_) => return false,
        };
        if socket.send_to(&encoded, target.socket_addr()).is_err() {
            return false;
        }
        let mut sink = StreamVerdict::default();
        let heard_anything = collect_any(&socket, &question, settings.wait, &mut sink);
        if heard_anything {
            return false;
        }
    }
    true
}

fn bind_probe_socket() -> io::Result<UdpSocket> {
    UdpSocket::bind(("0.0.0.0", 0))
}

/// Receives until `wait` elapses or a fully matching response arrives.
/// Returns whether a match arrived.
fn collect_window(
    socket: &UdpSocket,
    question: &DnsQuestion,
    wait: Duration,
    stream: &mut StreamVerdict,
) -> bool {
    let sent_at = Instant::now();
    let deadline = sent_at + wait;
    let mut buf = [0u8; 4096];
    loop {
        let now = Instant::now();
        if now >= deadline {
            return false;
        }
        if socket.set_read_timeout(Some(deadline - now)).is_err() {
            return false;
        }
        match socket.recv_from(&mut buf) {
            Ok((n, peer)) => {
                let raw = RawResponse {
                    source: peer,
                    bytes: buf[..n].to_vec(),
                    rtt: sent_at.elapsed(),
                };
                if stream.absorb(question, &raw) {
                    return true;
                }
            }
            Err(err)
                if err.kind() == io::ErrorKind::WouldBlock
                    || err.kind() == io::ErrorKind::TimedOut =>
            {
                return false;
            }
            Err(err) => {
                debug!("probe recv error: {err}");
                return false;
            }
        }
    }
}

/// Like `collect_window` but reports whether anything at all was received,
/// matching or not. Used by the control check.
fn collect_any(
    socket: &UdpSocket,
    question: &DnsQuestion,
    wait: Duration,
    stream: &mut StreamVerdict,
) -> bool {
    let sent_at = Instant::now();
    let deadline = sent_at + wait;
    let mut buf = [0u8; 4096];
    let mut heard = false;
    loop {
        let now = Instant::now();
        if now >= deadline {
            return heard;
        }
        if socket.set_read_timeout(Some(deadline - now)).is_err() {
            return heard;
        }
        match socket.recv_from(&mut buf) {
            Ok((n, peer)) => {
                heard = true;
                let raw = RawResponse {
                    source: peer,
                    bytes: buf[..n].to_vec(),
                    rtt: sent_at.elapsed(),
                };
                stream.absorb(question, &raw);
            }
            Err(err)
                if err.kind() == io::ErrorKind::WouldBlock
                    || err.kind() == io::ErrorKind::TimedOut =>
            {
                return heard;
            }
            Err(_) => return heard,
        }
    }
}
