//! Durable run state: frontier, dedup sets, budget counter, verdicts,
//! per-phrase statistics, and the blocklist itself.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::Write;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::ingest::PageDocument;
use crate::probe::ProbeOutcome;
use crate::segment::NgramMode;

/// A confirmed-censored hostname with discovery provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocklistEntry {
    /// Lowercase, no trailing dot. Unique per run.
    pub host: String,
    pub first_seen_at: DateTime<Utc>,
    /// Surface form of the phrase whose search surfaced the host.
    pub discovered_via_phrase: String,
    pub source_result_url: String,
    pub ngram_mode: NgramMode,
}

impl BlocklistEntry {
    /// One tab-separated record line.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.host,
            self.first_seen_at
                .to_rfc3339_opts(SecondsFormat::Secs, true),
            self.discovered_via_phrase,
            self.source_result_url,
            self.ngram_mode
        )
    }
}

/// One discovery event: which unique-URL count a new censored host
/// appeared at. Feeds the discovery-over-crawl curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryEvent {
    pub url_counter: u64,
    pub host: String,
}

/// Per-phrase search effectiveness. Hosts are tracked as sets so a host
/// appearing under several result URLs counts once; a phrase's block rate
/// is censored hosts over unique result hosts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseStats {
    pub result_hosts: HashSet<String>,
    pub censored_hosts: HashSet<String>,
}

impl PhraseStats {
    pub fn results_returned(&self) -> u64 {
        self.result_hosts.len() as u64
    }

    pub fn censored_hosts_found(&self) -> u64 {
        self.censored_hosts.len() as u64
    }
}

/// Everything one pipeline run accumulates. Checkpointable as a whole.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunState {
    pub ngram_mode: NgramMode,
    /// Censored pages waiting for phrase extraction, FIFO.
    pub frontier: VecDeque<PageDocument>,
    /// Every URL ever accepted or seeded; the dedup domain.
    pub seen_urls: HashSet<String>,
    /// Unique search-result URLs accepted by the filter. Seeds are in
    /// `seen_urls` but do not count here, so the budget is spent on
    /// discovery only.
    pub url_counter: u64,
    pub seed_url_count: u64,
    pub seed_hosts: HashSet<String>,
    pub host_verdicts: HashMap<String, ProbeOutcome>,
    pub used_phrases: HashSet<String>,
    pub phrase_stats: HashMap<String, PhraseStats>,
    pub blocklist: Vec<BlocklistEntry>,
    /// Hosts already on the blocklist; mirrors `blocklist` for O(1) checks.
    pub blocklisted_hosts: HashSet<String>,
    pub discovery_log: Vec<DiscoveryEvent>,
    /// Accepted-URL count per host, censored or not.
    pub host_url_counts: HashMap<String, u64>,
}

impl RunState {
    pub fn new(ngram_mode: NgramMode) -> Self {
        RunState {
            ngram_mode,
            frontier: VecDeque::new(),
            seen_urls: HashSet::new(),
            url_counter: 0,
            seed_url_count: 0,
            seed_hosts: HashSet::new(),
            host_verdicts: HashMap::new(),
            used_phrases: HashSet::new(),
            phrase_stats: HashMap::new(),
            blocklist: Vec::new(),
            blocklisted_hosts: HashSet::new(),
            discovery_log: Vec::new(),
            host_url_counts: HashMap::new(),
        }
    }

    /// Internal consistency: counters against sets, blocklist against
    /// verdicts. Debug builds call this after every step.
    pub fn check_invariants(&self) {
        debug_assert_eq!(
            self.url_counter + self.seed_url_count,
            self.seen_urls.len() as u64,
            "url counter out of sync with seen set"
        );
        debug_assert_eq!(
            self.blocklist.len(),
            self.blocklisted_hosts.len(),
            "blocklist host set out of sync"
        );
        debug_assert!(self
            .blocklist
            .iter()
            .all(|e| self.host_verdicts.get(&e.host).is_some_and(|v| v.is_censored())));
    }

    /// Hosts with any verdict this run.
    pub fn probed_hosts(&self) -> HashSet<String> {
        self.host_verdicts.keys().cloned().collect()
    }

    /// Writes the blocklist: UTF-8, one tab-separated record per line,
    /// in discovery order.
    pub fn write_blocklist(&self, mut w: impl Write) -> std::io::Result<()> {
        for entry in &self.blocklist {
            writeln!(w, "{}", entry.to_line())?;
        }
        Ok(())
    }

    pub fn blocklist_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_blocklist(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("blocklist is utf-8")
    }
}
