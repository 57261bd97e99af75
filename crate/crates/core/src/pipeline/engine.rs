//! The orchestrator. One logical coordinator owns the `RunState`; the
//! fetch, search, and probe stages hang off it as injected dependencies,
//! so a live run and a fully offline simulated run drive the exact same
//! loop.

use log::{info, warn};

use crate::ingest::PageSource;
use crate::probe::Prober;
use crate::rank::{score_phrases_with, select_queries, CorpusFrequencyProvider};
use crate::search::{filter_results, FilteredResult, SearchClient};
use crate::segment::{extract_ngrams, segment, Phrase, SegmenterDictionary};

use super::clock::Clock;
use super::state::{BlocklistEntry, DiscoveryEvent, RunState};
use super::{PipelineError, RunConfig};

/// Everything the loop needs besides configuration. Tests and the
/// `simulate` command wire these to fixtures and the simulated censor.
pub struct EngineDeps {
    pub search: SearchClient,
    pub pages: Box<dyn PageSource>,
    pub corpus: Box<dyn CorpusFrequencyProvider>,
    pub prober: Prober,
    pub dict: SegmenterDictionary,
    pub clock: Clock,
}

/// What one `step` did, for progress reporting.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub page_url: Option<String>,
    pub queries_issued: usize,
    pub urls_accepted: u64,
    pub hosts_discovered: u64,
    pub budget_exhausted: bool,
}

pub struct Engine {
    config: RunConfig,
    exclusions: crate::search::ExclusionList,
    deps: EngineDeps,
}

impl Engine {
    pub fn new(config: RunConfig, deps: EngineDeps) -> Self {
        let exclusions = config.exclusion_list();
        Engine {
            config,
            exclusions,
            deps,
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Probes every seed's host and fills the frontier with the pages of
    /// the currently censored ones. Seeds enter the dedup set but not the
    /// URL budget, and seed hosts never enter the blocklist — discovered
    /// hosts must be new.
    pub fn bootstrap(&self) -> Result<RunState, PipelineError> {
        let seeds = self.config.collected_seeds()?;
        if seeds.is_empty() {
            return Err(PipelineError::NoSeeds);
        }
        let mut state = RunState::new(self.config.ngram_mode);
        let mut censored = 0usize;
        let mut fetched = 0usize;

        for url in &seeds {
            let Some(host) = crate::search::host_of(url) else {
                warn!("seed {url:?} has no parseable host; skipped");
                continue;
            };
            if !state.seen_urls.insert(url.clone()) {
                continue;
            }
            state.seed_url_count += 1;
            state.seed_hosts.insert(host.clone());
            let outcome = self.verdict_for(&mut state, &host);
            if !outcome.is_censored() {
                continue;
            }
            censored += 1;
            match self.deps.pages.fetch_page(url) {
                Ok(doc) => {
                    fetched += 1;
                    state.frontier.push_back(doc);
                }
                Err(err) => warn!("seed fetch {url} failed: {err}"),
            }
        }

        info!(
            "bootstrap: {} seeds, {censored} censored, {fetched} pages on the frontier",
            seeds.len()
        );
        if state.frontier.is_empty() {
            return Err(PipelineError::EmptyFrontier {
                seed_count: seeds.len(),
                censored,
                fetched,
            });
        }
        state.check_invariants();
        Ok(state)
    }

    /// Pops one page, turns it into at most `queries_per_page` fresh
    /// search queries, and works through the filtered results: count,
    /// probe, blocklist, feed back. Individual fetch/search/probe
    /// failures are logged and skipped; only budget exhaustion stops the
    /// loop mid-page.
    pub fn step(&self, state: &mut RunState) -> StepReport {
        let mut report = StepReport::default();
        if state.url_counter >= self.config.url_budget {
            report.budget_exhausted = true;
            return report;
        }
        let Some(page) = state.frontier.pop_front() else {
            return report;
        };
        report.page_url = Some(page.url.clone());

        let segments = segment(&page.body_text, &self.deps.dict);
        let counts = extract_ngrams(&segments, self.config.ngram_mode);
        if counts.is_empty() {
            return report;
        }
        let scored = score_phrases_with(&counts, self.deps.corpus.as_ref(), self.config.idf);
        let queries = select_queries(&scored, self.config.queries_per_page, &state.used_phrases);

        'phrases: for phrase in queries {
            state.used_phrases.insert(phrase.surface().to_string());
            report.queries_issued += 1;
            let results = match self
                .deps
                .search
                .search(&phrase, self.config.results_per_query)
            {
                Ok(results) => results,
                Err(err) => {
                    warn!("search for {:?} failed: {err}", phrase.surface());
                    state.phrase_stats.entry(phrase.surface().to_string()).or_default();
                    continue;
                }
            };
            let probed = state.probed_hosts();
            let filtered = filter_results(results, &self.exclusions, &state.seen_urls, &probed);
            for result in filtered {
                if state.url_counter >= self.config.url_budget {
                    report.budget_exhausted = true;
                    break 'phrases;
                }
                self.accept_result(state, &phrase, result, &mut report);
            }
        }
        state.check_invariants();
        report
    }

    /// One accepted result URL: spend budget, record statistics, probe
    /// the host (cached), and feed a censored page back to the frontier.
    fn accept_result(
        &self,
        state: &mut RunState,
        phrase: &Phrase,
        filtered: FilteredResult,
        report: &mut StepReport,
    ) {
        let url = filtered.result.url;
        let host = filtered.result.host;
        if !state.seen_urls.insert(url.clone()) {
            return;
        }
        state.url_counter += 1;
        report.urls_accepted += 1;
        *state.host_url_counts.entry(host.clone()).or_insert(0) += 1;
        state
            .phrase_stats
            .entry(phrase.surface().to_string())
            .or_default()
            .result_hosts
            .insert(host.clone());

        let outcome = self.verdict_for(state, &host);
        if !outcome.is_censored() {
            return;
        }
        state
            .phrase_stats
            .get_mut(phrase.surface())
            .expect("stats entry created above")
            .censored_hosts
            .insert(host.clone());

        let is_new = !state.blocklisted_hosts.contains(&host) && !state.seed_hosts.contains(&host);
        if is_new {
            state.blocklisted_hosts.insert(host.clone());
            state.blocklist.push(BlocklistEntry {
                host: host.clone(),
                first_seen_at: self.deps.clock.now(),
                discovered_via_phrase: phrase.surface().to_string(),
                source_result_url: url.clone(),
                ngram_mode: state.ngram_mode,
            });
            state.discovery_log.push(DiscoveryEvent {
                url_counter: state.url_counter,
                host: host.clone(),
            });
            report.hosts_discovered += 1;
            info!("discovered censored host {host} via {:?}", phrase.surface());
        }

        // Every censored page feeds back as a fresh phrase source; each
        // unique URL is fetched at most once per run.
        match self.deps.pages.fetch_page(&url) {
            Ok(doc) => state.frontier.push_back(doc),
            Err(err) => warn!("fetch of censored page {url} failed: {err}"),
        }
    }

    /// Cached per-host verdict: each hostname is probed at most once per
    /// run, however many of its URLs surface.
    fn verdict_for(&self, state: &mut RunState, host: &str) -> crate::probe::ProbeOutcome {
        if let Some(hit) = state.host_verdicts.get(host) {
            return hit.clone();
        }
        let outcome = self.deps.prober.probe_host(host);
        state.host_verdicts.insert(host.to_string(), outcome.clone());
        outcome
    }

    /// Bootstrap, then step until the budget is spent or the frontier
    /// drains. Deterministic given a deterministic simulator, fixture
    /// search backend, and fixed seed ordering.
    pub fn run(&self) -> Result<RunState, PipelineError> {
        let state = self.bootstrap()?;
        Ok(self.run_from(state))
    }

    /// Continues a run from existing (possibly resumed) state.
    pub fn run_from(&self, mut state: RunState) -> RunState {
        while !state.frontier.is_empty() && state.url_counter < self.config.url_budget {
            self.step(&mut state);
        }
        state
    }
}
