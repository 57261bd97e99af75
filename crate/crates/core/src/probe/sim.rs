//! An in-process simulated censor: a UDP responder with a configurable
//! censored-hostname set. Backs all probe tests and the offline
//! `simulate` mode; nothing in here ever touches a real network.

use std::collections::HashSet;
use std::io;
use std::net::{Ipv4Addr, SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use log::debug;

use super::wire::{decode_query, DnsQuestion};
use super::ProbeTarget;

/// Default forged answer address (TEST-NET-3).
pub const DEFAULT_INJECTED_IP: Ipv4Addr = Ipv4Addr::new(203, 0, 113, 7);

/// How the simulated censor reacts to a query.
#[derive(Debug, Clone)]
pub enum CensorBehavior {
    /// Inject an answer when the query name is in the set; stay silent
    /// otherwise. This is the realistic injector.
    InjectSet(HashSet<String>),
    /// Answer every query, the way an actual resolver would. Targets
    /// showing this behavior must fail the control check.
    InjectAll,
    /// Never answer anything.
    Blackhole,
    /// Answer queries for censored names but with a corrupted txid —
    /// spoof noise that must never produce a Censored verdict.
    WrongTxid(HashSet<String>),
}

impl CensorBehavior {
    pub fn inject_set(hosts: impl IntoIterator<Item = impl Into<String>>) -> Self {
        CensorBehavior::InjectSet(
            hosts
                .into_iter()
                .map(|h| h.into().to_ascii_lowercase())
                .collect(),
        )
    }
}

/// Handle to the responder thread. Dropping it shuts the thread down.
pub struct SimulatedCensor {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl SimulatedCensor {
    /// Binds a loopback socket and starts responding per `behavior`.
    pub fn spawn(behavior: CensorBehavior, latency: Duration) -> io::Result<Self> {
        Self::spawn_with_ip(behavior, latency, DEFAULT_INJECTED_IP)
    }

    pub fn spawn_with_ip(
        behavior: CensorBehavior,
        latency: Duration,
        injected_ip: Ipv4Addr,
    ) -> io::Result<Self> {
        let socket = UdpSocket::bind(("127.0.0.1", 0))?;
        let addr = socket.local_addr()?;
        socket.set_read_timeout(Some(Duration::from_millis(25)))?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let handle = std::thread::Builder::new()
            .name("sim-censor".to_string())
            .spawn(move || respond_loop(socket, behavior, latency, injected_ip, flag))?;
        Ok(SimulatedCensor {
            addr,
            shutdown,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// The censor's address as an (unvalidated) probe target.
    pub fn target(&self) -> ProbeTarget {
        ProbeTarget::new(self.addr.ip(), self.addr.port())
    }
}

impl Drop for SimulatedCensor {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn respond_loop(
    socket: UdpSocket,
    behavior: CensorBehavior,
    latency: Duration,
    injected_ip: Ipv4Addr,
    shutdown: Arc<AtomicBool>,
) {
    let mut buf = [0u8; 4096];
    while !shutdown.load(Ordering::SeqCst) {
        let (n, peer) = match socket.recv_from(&mut buf) {
            Ok(ok) => ok,
            Err(err)
                if err.kind() == io::ErrorKind::WouldBlock
                    || err.kind() == io::ErrorKind::TimedOut =>
            {
                continue;
            }
            Err(err) => {
                debug!("sim censor recv: {err}");
                continue;
            }
        };
        let question = match decode_query(&buf[..n]) {
            Ok(q) => q,
            Err(_) => continue,
        };
        let response = match &behavior {
            CensorBehavior::Blackhole => None,
            CensorBehavior::InjectAll => Some(build_injection(&question, injected_ip, false)),
            CensorBehavior::InjectSet(set) => set
                .contains(&question.qname)
                .then(|| build_injection(&question, injected_ip, false)),
            CensorBehavior::WrongTxid(set) => set
                .contains(&question.qname)
                .then(|| build_injection(&question, injected_ip, true)),
        };
        if let Some(bytes) = response {
            if !latency.is_zero() {
                std::thread::sleep(latency);
            }
            let _ = socket.send_to(&bytes, peer);
        }
    }
}

/// Forges the injected response: QR=1, the question echoed, one A record.
fn build_injection(question: &DnsQuestion, ip: Ipv4Addr, corrupt_txid: bool) -> Vec<u8> {
    let txid = if corrupt_txid {
        question.txid.wrapping_add(1)
    } else {
        question.txid
    };
    let mut bytes = Vec::with_capacity(64);
    bytes.extend_from_slice(&txid.to_be_bytes());
    bytes.extend_from_slice(&0x8180u16.to_be_bytes()); // QR=1, RD, RA
    bytes.extend_from_slice(&1u16.to_be_bytes()); // QDCOUNT
    bytes.extend_from_slice(&1u16.to_be_bytes()); // ANCOUNT
    bytes.extend_from_slice(&[0, 0, 0, 0]);
    for label in question.qname.split('.') {
        bytes.push(label.len() as u8);
        bytes.extend_from_slice(label.as_bytes());
    }
    bytes.push(0);
    bytes.extend_from_slice(&question.qtype.to_be_bytes());
    bytes.extend_from_slice(&question.qclass.to_be_bytes());
    bytes.extend_from_slice(&[0xC0, 0x0C]); // name: pointer to the question
    bytes.extend_from_slice(&question.qtype.to_be_bytes());
    bytes.extend_from_slice(&question.qclass.to_be_bytes());
    bytes.extend_from_slice(&300u32.to_be_bytes()); // TTL
    bytes.extend_from_slice(&4u16.to_be_bytes());
    bytes.extend_from_slice(&ip.octets());
    bytes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::prober::{validate_target, ProbeSettings, Prober};
    use crate::probe::Verdict;

    fn fast_settings() -> ProbeSettings {
        ProbeSettings {
            trials: 3,
            wait: Duration::from_millis(60),
        }
    }

    fn validated(sim: &SimulatedCensor) -> ProbeTarget {
        let mut t = sim.target();
        t.validated = true;
        t
    }

    #[test]
    fn injector_censors_listed_host() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::ZERO,
        )
        .unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        let outcome = prober.probe_host("blocked.example");
        assert_eq!(outcome.verdict, Verdict::Censored);
        assert!(outcome.responses_seen >= 1);
        assert!(outcome
            .evidence
            .iter()
            .any(|e| e.answer_ips.contains(&DEFAULT_INJECTED_IP)));
    }

    #[test]
    fn blackhole_means_not_censored_after_all_trials() {
        let sim = SimulatedCensor::spawn(CensorBehavior::Blackhole, Duration::ZERO).unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        let outcome = prober.probe_host("clean.example");
        assert_eq!(outcome.verdict, Verdict::NotCensored);
        assert_eq!(outcome.trials, 3);
        assert_eq!(outcome.responses_seen, 0);
    }

    #[test]
    fn unlisted_host_is_not_censored_by_injector() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::ZERO,
        )
        .unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        assert_eq!(
            prober.probe_host("clean.example").verdict,
            Verdict::NotCensored
        );
    }

    #[test]
    fn wrong_txid_noise_is_ignored() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::WrongTxid(["blocked.example".to_string()].into_iter().collect()),
            Duration::ZERO,
        )
        .unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        let outcome = prober.probe_host("blocked.example");
        assert_eq!(outcome.verdict, Verdict::NotCensored);
        assert_eq!(outcome.responses_seen, 0);
        // The noise itself still lands in the evidence trail.
        assert!(!outcome.evidence.is_empty());
        assert!(outcome.evidence.iter().all(|e| !e.txid_matched));
    }

    #[test]
    fn silent_target_passes_control_check() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::ZERO,
        )
        .unwrap();
        assert!(validate_target(
            &sim.target(),
            "control.invalid",
            fast_settings()
        ));
    }

    #[test]
    fn answering_target_fails_control_check() {
        let sim = SimulatedCensor::spawn(CensorBehavior::InjectAll, Duration::ZERO).unwrap();
        assert!(!validate_target(
            &sim.target(),
            "control.invalid",
            fast_settings()
        ));
    }

    #[test]
    fn no_validated_targets_means_inconclusive() {
        let sim = SimulatedCensor::spawn(CensorBehavior::InjectAll, Duration::ZERO).unwrap();
        let prober = Prober::new(vec![sim.target()], fast_settings());
        assert_eq!(
            prober.probe_host("anything.example").verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn validate_targets_disables_resolver_like_targets() {
        let resolver = SimulatedCensor::spawn(CensorBehavior::InjectAll, Duration::ZERO).unwrap();
        let injector = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::ZERO,
        )
        .unwrap();
        let mut prober = Prober::new(
            vec![resolver.target(), injector.target()],
            fast_settings(),
        );
        assert_eq!(prober.validate_targets("control.invalid"), 1);
        assert!(prober.targets()[1].validated);
        assert!(!prober.targets()[0].validated);
    }

    #[test]
    fn injection_latency_is_tolerated_within_wait() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::from_millis(20),
        )
        .unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        assert_eq!(
            prober.probe_host("blocked.example").verdict,
            Verdict::Censored
        );
    }

    #[test]
    fn reprobe_is_deterministic_under_deterministic_simulator() {
        let sim = SimulatedCensor::spawn(
            CensorBehavior::inject_set(["blocked.example"]),
            Duration::ZERO,
        )
        .unwrap();
        let prober = Prober::new(vec![validated(&sim)], fast_settings());
        for _ in 0..5 {
            assert_eq!(
                prober.probe_host("blocked.example").verdict,
                Verdict::Censored
            );
            assert_eq!(
                prober.probe_host("clean.example").verdict,
                Verdict::NotCensored
            );
        }
    }
}
