//! The discovery feedback loop: seed, probe, extract, rank, search,
//! filter, probe, repeat — under a hard unique-URL budget, with durable
//! state.

pub mod clock;
pub mod engine;
pub mod snapshot;
pub mod state;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::FetchPolicy;
use crate::rank::IdfFormula;
use crate::search::SearchApiConfig;
use crate::segment::NgramMode;

pub use clock::Clock;
pub use engine::{Engine, EngineDeps, StepReport};
pub use snapshot::{checkpoint, resume, SnapshotError};
pub use state::{BlocklistEntry, DiscoveryEvent, PhraseStats, RunState};

/// Probe-side configuration: target addresses, the control hostname for
/// target validation, and per-trial timing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    /// `ip[:port]` entries, checked before `targets_file`.
    pub targets: Vec<String>,
    pub targets_file: Option<PathBuf>,
    /// A benign hostname known not to be censored; any target that
    /// answers a query for it is disqualified.
    pub control_host: String,
    pub trials: u32,
    pub wait_ms: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            targets: Vec::new(),
            targets_file: None,
            control_host: String::new(),
            trials: 3,
            wait_ms: 2000,
        }
    }
}

impl ProbeConfig {
    pub fn settings(&self) -> crate::probe::ProbeSettings {
        crate::probe::ProbeSettings {
            trials: self.trials,
            wait: std::time::Duration::from_millis(self.wait_ms),
        }
    }
}

/// Which search backend a run talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SearchBackendKind {
    #[default]
    Live,
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SearchConfig {
    pub backend: SearchBackendKind,
    /// Fixture directory for the mock backend.
    pub fixture_dir: Option<PathBuf>,
    /// Live API parameters.
    pub api: SearchApiConfig,
    /// Minimum spacing between live queries, milliseconds.
    pub min_query_interval_ms: u64,
}

/// Where document frequencies come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    #[default]
    Local,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CorpusConfig {
    pub kind: CorpusKind,
    /// Frequency table file for the local corpus.
    pub path: Option<PathBuf>,
    /// Lookup endpoint for the remote corpus.
    pub endpoint: String,
    pub query_param: String,
    /// Total documents N; for the remote provider this is a property of
    /// the service, so it must be configured.
    pub corpus_size: u64,
    pub cache_path: Option<PathBuf>,
}

/// Everything one run needs. Serializable as a single TOML file; every
/// key can be overridden from the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed_urls: Vec<String>,
    pub seeds_file: Option<PathBuf>,
    pub ngram_mode: NgramMode,
    pub url_budget: u64,
    /// Top-k phrases per page that become search queries.
    pub queries_per_page: usize,
    pub results_per_query: usize,
    pub exclusions: Vec<String>,
    pub dictionary: Option<PathBuf>,
    pub idf: IdfFormula,
    pub respect_robots: bool,
    pub fetch: FetchPolicy,
    pub probe: ProbeConfig,
    pub search: SearchConfig,
    pub corpus: CorpusConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed_urls: Vec::new(),
            seeds_file: None,
            ngram_mode: NgramMode::Unigram,
            url_budget: 1_000_000,
            queries_per_page: 10,
            results_per_query: 50,
            exclusions: crate::search::ExclusionList::default()
                .suffixes()
                .to_vec(),
            dictionary: None,
            idf: IdfFormula::Smoothed,
            respect_robots: true,
            fetch: FetchPolicy::default(),
            probe: ProbeConfig::default(),
            search: SearchConfig::default(),
            corpus: CorpusConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn exclusion_list(&self) -> crate::search::ExclusionList {
        crate::search::ExclusionList::new(self.exclusions.iter().cloned())
    }

    /// Seed URLs from the inline list plus the seeds file, deduplicated,
    /// order preserved.
    pub fn collected_seeds(&self) -> std::io::Result<Vec<String>> {
        let mut seeds = Vec::new();
        let mut seen = std::collections::HashSet::new();
        let mut push = |url: &str| {
            let url = url.trim();
            if !url.is_empty() && !url.starts_with('#') && seen.insert(url.to_string()) {
                seeds.push(url.to_string());
            }
        };
        for url in &self.seed_urls {
            push(url);
        }
        if let Some(path) = &self.seeds_file {
            for line in std::fs::read_to_string(path)?.lines() {
                push(line);
            }
        }
        Ok(seeds)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.url_budget == 0 {
            return Err(PipelineError::BadConfig("url_budget must be >= 1".into()));
        }
        if self.queries_per_page == 0 {
            return Err(PipelineError::BadConfig(
                "queries_per_page must be >= 1".into(),
            ));
        }
        if self.results_per_query == 0 || self.results_per_query > crate::search::BACKEND_PAGE_SIZE
        {
            return Err(PipelineError::BadConfig(format!(
                "results_per_query must be in 1..={}",
                crate::search::BACKEND_PAGE_SIZE
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("no seed urls configured")]
    NoSeeds,
    #[error(
        "bootstrap left the frontier empty: of {seed_count} seed pages, \
         {censored} probed censored and {fetched} fetched cleanly"
    )]
    EmptyFrontier {
        seed_count: usize,
        censored: usize,
        fetched: usize,
    },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
