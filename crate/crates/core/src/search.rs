//! Web-search backends and result filtering.
//!
//! One phrase, one backend request, at most one result page (50 results) —
//! the budget math of a run depends on that discipline, so the client
//! enforces it rather than trusting callers. Backends are pluggable: a
//! live HTTP JSON search API for real runs and a fixture directory for
//! offline runs and tests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::segment::Phrase;

/// Backend result-page size: one API call returns at most this many.
pub const BACKEND_PAGE_SIZE: usize = 50;

/// One search hit, in backend order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: String,
    /// Lowercase hostname derived from `url`, no trailing dot.
    pub host: String,
    /// 1-based position in the result page.
    pub rank: u32,
    /// Surface form of the originating phrase.
    pub query: String,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend rate limited the request")]
    RateLimited,
    #[error("backend returned HTTP {0}")]
    Http(u16),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
}

/// A single-request search backend returning ordered result URLs.
pub trait SearchBackend: Send + Sync {
    fn fetch_results(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError>;
}

/// Wraps a backend with the one-call-per-phrase contract, rank
/// assignment, host derivation, and the backoff-then-retry-once policy
/// for rate limiting.
pub struct SearchClient {
    backend: Box<dyn SearchBackend>,
    backoff: Duration,
}

impl SearchClient {
    pub fn new(backend: Box<dyn SearchBackend>) -> Self {
        SearchClient {
            backend,
            backoff: Duration::from_secs(2),
        }
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    /// Issues exactly one backend request for the phrase's surface form
    /// (one retry after backoff if the backend rate-limits) and returns at
    /// most `limit` ranked results.
    pub fn search(&self, phrase: &Phrase, limit: usize) -> Result<Vec<SearchResult>, BackendError> {
        let limit = limit.min(BACKEND_PAGE_SIZE);
        let query = phrase.surface();
        let urls = match self.backend.fetch_results(query, limit) {
            Err(BackendError::RateLimited) => {
                debug!("rate limited on {query:?}; backing off {:?}", self.backoff);
                std::thread::sleep(self.backoff);
                self.backend.fetch_results(query, limit)?
            }
            other => other?,
        };
        Ok(urls
            .into_iter()
            .take(limit)
            .filter_map(|url| match host_of(&url) {
                Some(host) => Some((url, host)),
                None => {
                    debug!("dropping result without a parseable host: {url:?}");
                    None
                }
            })
            .enumerate()
            .map(|(idx, (url, host))| SearchResult {
                url,
                host,
                rank: idx as u32 + 1,
                query: query.to_string(),
            })
            .collect())
    }
}

/// Lowercase hostname of an absolute URL, trailing dot stripped.
pub fn host_of(url: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    let host = parsed.host_str()?;
    Some(host.trim_end_matches('.').to_ascii_lowercase())
}

/// Domain suffixes whose results are dropped wholesale. Matching is
/// label-aligned: `blogspot.com` matches `x.blogspot.com` but never
/// `notblogspot.com`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExclusionList {
    suffixes: Vec<String>,
}

impl Default for ExclusionList {
    fn default() -> Self {
        ExclusionList::new([
            "blogspot.com",
            "facebook.com",
            "twitter.com",
            "youtube.com",
            "tumblr.com",
        ])
    }
}

impl ExclusionList {
    pub fn new(suffixes: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ExclusionList {
            suffixes: suffixes
                .into_iter()
                .map(|s| {
                    s.into()
                        .trim()
                        .trim_start_matches('.')
                        .to_ascii_lowercase()
                })
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    pub fn suffixes(&self) -> &[String] {
        &self.suffixes
    }

    pub fn matches(&self, host: &str) -> bool {
        let host = host.to_ascii_lowercase();
        self.suffixes.iter().any(|suffix| {
            host == *suffix
                || (host.len() > suffix.len()
                    && host.ends_with(suffix.as_str())
                    && host.as_bytes()[host.len() - suffix.len() - 1] == b'.')
        })
    }
}

/// A result that survived filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredResult {
    pub result: SearchResult,
    /// The host already has a verdict this run: count the URL, skip the probe.
    pub probe_skippable: bool,
}

/// Applies the exclusion list and URL dedup. Results on already-probed
/// hosts survive (their URLs still count toward the budget and per-domain
/// statistics) but come back marked probe-skippable. Idempotent.
pub fn filter_results(
    results: Vec<SearchResult>,
    exclusions: &ExclusionList,
    seen_urls: &HashSet<String>,
    probed_hosts: &HashSet<String>,
) -> Vec<FilteredResult> {
    let mut batch_urls: HashSet<String> = HashSet::new();
    results
        .into_iter()
        .filter(|r| !exclusions.matches(&r.host))
        .filter(|r| !seen_urls.contains(&r.url))
        .filter(|r| batch_urls.insert(r.url.clone()))
        .map(|result| {
            let probe_skippable = probed_hosts.contains(&result.host);
            FilteredResult {
                result,
                probe_skippable,
            }
        })
        .collect()
}

/// Fixture filename stem for a query: first 16 hex characters of the
/// query surface's SHA-256.
pub fn fixture_key(query: &str) -> String {
    let digest = Sha256::digest(query.as_bytes());
    digest
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// On-disk shape of one mock result page.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MockResultsFile {
    pub query: String,
    pub urls: Vec<String>,
}

/// Offline backend reading result pages from a fixture directory of JSON
/// files keyed by `fixture_key` of the query surface. Queries without a
/// fixture return an empty page.
pub struct MockSearchBackend {
    dir: PathBuf,
}

impl MockSearchBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockSearchBackend { dir: dir.into() }
    }

    /// Writes the fixture file for `query`; the fixture-authoring side of
    /// the format.
    pub fn write_fixture(dir: &Path, query: &str, urls: &[String]) -> Result<(), std::io::Error> {
        let file = MockResultsFile {
            query: query.to_string(),
            urls: urls.to_vec(),
        };
        let path = dir.join(format!("{}.json", fixture_key(query)));
        std::fs::write(path, serde_json::to_string_pretty(&file)?)
    }
}

impl SearchBackend for MockSearchBackend {
    fn fetch_results(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let path = self.dir.join(format!("{}.json", fixture_key(query)));
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => {
                debug!("no search fixture for {query:?}");
                return Ok(Vec::new());
            }
            Err(err) => return Err(BackendError::Transport(err.to_string())),
        };
        let file: MockResultsFile =
            serde_json::from_str(&text).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if file.query != query {
            return Err(BackendError::Malformed(format!(
                "fixture {path:?} is for query {:?}, not {query:?}",
                file.query
            )));
        }
        Ok(file.urls.into_iter().take(limit).collect())
    }
}

/// Field paths and parameters for a live HTTP JSON search API.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchApiConfig {
    pub endpoint: String,
    /// API key sent on every request; header name configurable.
    pub api_key: String,
    pub key_header: String,
    pub query_param: String,
    pub count_param: String,
    /// Optional language/market hint, e.g. ("mkt", "zh-CN").
    pub market: Option<(String, String)>,
    /// Dot path to the result array inside the JSON response.
    pub results_path: String,
    /// Field holding the URL inside each result object.
    pub url_field: String,
}

impl Default for SearchApiConfig {
    fn default() -> Self {
        SearchApiConfig {
            endpoint: String::new(),
            api_key: String::new(),
            key_header: "Ocp-Apim-Subscription-Key".to_string(),
            query_param: "q".to_string(),
            count_param: "count".to_string(),
            market: None,
            results_path: "webPages.value".to_string(),
            url_field: "url".to_string(),
        }
    }
}

/// Live HTTPS backend. The query goes out as a URL parameter, the API key
/// as a request header; the response is JSON carrying an ordered result
/// list at `results_path`.
pub struct HttpSearchBackend {
    config: SearchApiConfig,
    client: reqwest::blocking::Client,
}

impl HttpSearchBackend {
    pub fn new(config: SearchApiConfig, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpSearchBackend { config, client })
    }
}

impl SearchBackend for HttpSearchBackend {
    fn fetch_results(&self, query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
        let mut request = self
            .client
            .get(&self.config.endpoint)
            .header(&self.config.key_header, &self.config.api_key)
            .query(&[
                (self.config.query_param.as_str(), query),
                (self.config.count_param.as_str(), &limit.to_string()),
            ]);
        if let Some((param, value)) = &self.config.market {
            request = request.query(&[(param.as_str(), value.as_str())]);
        }
        let response = request
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited);
        }
        if !status.is_success() {
            return Err(BackendError::Http(status.as_u16()));
        }
        let body: serde_json::Value = response
            .json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        let mut node = &body;
        for key in self.config.results_path.split('.') {
            node = node
                .get(key)
                .ok_or_else(|| BackendError::Malformed(format!("missing field {key:?}")))?;
        }
        let items = node
            .as_array()
            .ok_or_else(|| BackendError::Malformed("results path is not an array".into()))?;
        let mut urls = Vec::new();
        for item in items {
            match item.get(&self.config.url_field).and_then(|v| v.as_str()) {
                Some(url) => urls.push(url.to_string()),
                None => warn!("search result without {:?} field", self.config.url_field),
            }
        }
        Ok(urls)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::Token;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn phrase(s: &str) -> Phrase {
        Phrase::new(s.split(' ').map(Token::latin).collect()).unwrap()
    }

    struct CountingBackend {
        calls: Arc<AtomicUsize>,
        urls: Vec<String>,
    }

    impl SearchBackend for CountingBackend {
        fn fetch_results(&self, _query: &str, limit: usize) -> Result<Vec<String>, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(self.urls.iter().take(limit).cloned().collect())
        }
    }

    struct RateLimitedBackend {
        calls: AtomicUsize,
        fail_first: usize,
    }

    impl SearchBackend for RateLimitedBackend {
        fn fetch_results(&self, _query: &str, _limit: usize) -> Result<Vec<String>, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(BackendError::RateLimited)
            } else {
                Ok(vec!["http://ok.example/".to_string()])
            }
        }
    }

    fn urls(n: usize) -> Vec<String> {
        (0..n)
            .map(|i| format!("http://host{i:02}.example/page"))
            .collect()
    }

    fn counting_client(n: usize) -> (SearchClient, Arc<AtomicUsize>) {
        let calls = Arc::new(AtomicUsize::new(0));
        let client = SearchClient::new(Box::new(CountingBackend {
            calls: Arc::clone(&calls),
            urls: urls(n),
        }));
        (client, calls)
    }

    #[test]
    fn full_page_gets_ranks_one_to_fifty() {
        let (client, _) = counting_client(50);
        let results = client.search(&phrase("特首"), 50).unwrap();
        assert_eq!(results.len(), 50);
        assert_eq!(results.first().unwrap().rank, 1);
        assert_eq!(results.last().unwrap().rank, 50);
        assert!(results.iter().all(|r| r.query == "特首"));
    }

    #[test]
    fn underfull_page_passes_through() {
        let (client, _) = counting_client(3);
        assert_eq!(client.search(&phrase("rare"), 50).unwrap().len(), 3);
    }

    #[test]
    fn exactly_one_backend_call_per_search() {
        let (client, calls) = counting_client(5);
        client.search(&phrase("once"), 50).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        client.search(&phrase("twice"), 50).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn rate_limit_retries_once_then_surfaces() {
        let client = SearchClient::new(Box::new(RateLimitedBackend {
            calls: AtomicUsize::new(0),
            fail_first: 1,
        }))
        .with_backoff(Duration::from_millis(1));
        assert!(client.search(&phrase("p"), 10).is_ok());

        let client = SearchClient::new(Box::new(RateLimitedBackend {
            calls: AtomicUsize::new(0),
            fail_first: 2,
        }))
        .with_backoff(Duration::from_millis(1));
        assert!(matches!(
            client.search(&phrase("p"), 10),
            Err(BackendError::RateLimited)
        ));
    }

    #[test]
    fn exclusion_matching_is_label_aligned() {
        let exclusions = ExclusionList::default();
        assert!(exclusions.matches("a.blogspot.com"));
        assert!(exclusions.matches("blogspot.com"));
        assert!(exclusions.matches("deep.sub.twitter.com"));
        assert!(!exclusions.matches("notblogspot.com"));
        assert!(!exclusions.matches("blogspot.com.evil.example"));
    }

    #[test]
    fn filter_drops_excluded_and_seen() {
        let results = vec![
            SearchResult {
                url: "http://a.blogspot.com/x".into(),
                host: "a.blogspot.com".into(),
                rank: 1,
                query: "q".into(),
            },
            SearchResult {
                url: "http://fresh.example/x".into(),
                host: "fresh.example".into(),
                rank: 2,
                query: "q".into(),
            },
            SearchResult {
                url: "http://seen.example/x".into(),
                host: "seen.example".into(),
                rank: 3,
                query: "q".into(),
            },
        ];
        let seen: HashSet<String> = ["http://seen.example/x".to_string()].into_iter().collect();
        let filtered = filter_results(results, &ExclusionList::default(), &seen, &HashSet::new());
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered[0].result.host, "fresh.example");
    }

    #[test]
    fn probed_hosts_survive_as_skippable() {
        let results = vec![SearchResult {
            url: "http://known.example/new-page".into(),
            host: "known.example".into(),
            rank: 1,
            query: "q".into(),
        }];
        let probed: HashSet<String> = ["known.example".to_string()].into_iter().collect();
        let filtered = filter_results(results, &ExclusionList::default(), &HashSet::new(), &probed);
        assert_eq!(filtered.len(), 1);
        assert!(filtered[0].probe_skippable);
    }

    #[test]
    fn filtering_is_idempotent() {
        let results: Vec<SearchResult> = (0..10)
            .map(|i| SearchResult {
                url: format!("http://h{i}.example/p"),
                host: format!("h{i}.example"),
                rank: i + 1,
                query: "q".into(),
            })
            .collect();
        let seen: HashSet<String> = ["http://h3.example/p".to_string()].into_iter().collect();
        let probed: HashSet<String> = ["h5.example".to_string()].into_iter().collect();
        let once = filter_results(results, &ExclusionList::default(), &seen, &probed);
        let twice = filter_results(
            once.iter().map(|f| f.result.clone()).collect(),
            &ExclusionList::default(),
            &seen,
            &probed,
        );
        assert_eq!(once, twice);
    }

    #[test]
    fn mock_backend_round_trips_fixtures() {
        let dir = tempfile::tempdir().unwrap();
        let stored = vec![
            "http://one.example/a".to_string(),
            "http://two.example/b".to_string(),
        ];
        MockSearchBackend::write_fixture(dir.path(), "特首", &stored).unwrap();
        let backend = MockSearchBackend::new(dir.path());
        assert_eq!(backend.fetch_results("特首", 50).unwrap(), stored);
        assert!(backend.fetch_results("missing", 50).unwrap().is_empty());
    }

    #[test]
    fn mock_backend_rejects_query_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        // A fixture stored under the wrong key, as a typo would produce.
        let file = MockResultsFile {
            query: "other".to_string(),
            urls: vec![],
        };
        std::fs::write(
            dir.path().join(format!("{}.json", fixture_key("wanted"))),
            serde_json::to_string(&file).unwrap(),
        )
        .unwrap();
        let backend = MockSearchBackend::new(dir.path());
        assert!(matches!(
            backend.fetch_results("wanted", 50),
            Err(BackendError::Malformed(_))
        ));
    }

    #[test]
    fn host_of_lowercases_and_strips_trailing_dot() {
        assert_eq!(
            host_of("http://WWW.Example.COM./x"),
            Some("www.example.com".into())
        );
        assert_eq!(host_of("not a url"), None);
    }
}
