//! Page fetching and text extraction.
//!
//! Pages are always fetched from an uncensored vantage point and reduced
//! to plain text before phrase extraction. Every fetch failure is a
//! skippable event for the pipeline — a single dead page must never stall
//! a million-URL run.

pub mod fetch;
pub mod text;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fetch::{HttpFetcher, RateLimitTable};
pub use text::{extract_text, strip_markup};

use crate::pipeline::clock::Clock;
use crate::search::host_of;

/// A fetched web page reduced to the bits phrase extraction needs.
/// Immutable value, safe to hand between concurrent stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageDocument {
    /// Absolute URL the text was taken from (post-redirect).
    pub url: String,
    /// Lowercase hostname of `url`, trailing dot stripped.
    pub host: String,
    /// Extracted plain text: no markup, no script or style content.
    pub body_text: String,
    pub fetched_at: DateTime<Utc>,
    /// Raw bytes read before extraction, capped by the fetch policy.
    pub content_bytes_read: u64,
}

/// Fetch behavior knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchPolicy {
    pub timeout_secs: f64,
    pub max_body_bytes: u64,
    pub max_redirects: u32,
    pub user_agent: String,
    /// Politeness delay between requests to the same host.
    pub per_host_delay_secs: f64,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        FetchPolicy {
            timeout_secs: 30.0,
            max_body_bytes: 1 << 20,
            max_redirects: 5,
            user_agent: format!("censorseek/{}", env!("CARGO_PKG_VERSION")),
            per_host_delay_secs: 1.0,
        }
    }
}

impl FetchPolicy {
    pub fn timeout(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.timeout_secs.max(0.001))
    }

    pub fn per_host_delay(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.per_host_delay_secs.max(0.0))
    }
}

/// All fetch failures are skippable events, never fatal to a run.
#[derive(Debug, Error)]
pub enum FetchError {
    #[error("invalid url {0:?}")]
    InvalidUrl(String),
    #[error("url scheme must be http or https: {0:?}")]
    UnsupportedScheme(String),
    #[error("request timed out")]
    Timeout,
    #[error("redirect chain exceeded the limit")]
    TooManyRedirects,
    #[error("content type {0:?} is neither HTML nor plain text")]
    NonHtmlContent(String),
    #[error("server answered HTTP {0}")]
    HttpStatus(u16),
    #[error("robots.txt disallows this path")]
    RobotsDisallowed,
    #[error("transport failure: {0}")]
    TransportFailure(String),
}

/// Where pages come from: the live HTTP fetcher, or a fixture directory
/// in offline simulation.
pub trait PageSource: Send + Sync {
    fn fetch_page(&self, url: &str) -> Result<PageDocument, FetchError>;
}

/// On-disk index for a fixture page set: URL to HTML file, relative to
/// the index's directory.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct PageIndex {
    pub pages: HashMap<String, String>,
}

/// Serves pages from a fixture directory: a `pages.json` index mapping
/// URL to HTML file. Timestamps come from the injected clock so offline
/// runs are reproducible byte-for-byte.
pub struct FixturePageSource {
    dir: PathBuf,
    index: PageIndex,
    clock: Clock,
}

impl FixturePageSource {
    pub fn open(dir: &Path, clock: Clock) -> Result<Self, std::io::Error> {
        let text = std::fs::read_to_string(dir.join("pages.json"))?;
        let index: PageIndex = serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(FixturePageSource {
            dir: dir.to_path_buf(),
            index,
            clock,
        })
    }
}

impl PageSource for FixturePageSource {
    fn fetch_page(&self, url: &str) -> Result<PageDocument, FetchError> {
        let file = self
            .index
            .pages
            .get(url)
            .ok_or_else(|| FetchError::TransportFailure(format!("no fixture page for {url}")))?;
        let bytes = std::fs::read(self.dir.join(file))
            .map_err(|e| FetchError::TransportFailure(e.to_string()))?;
        let host = host_of(url).ok_or_else(|| FetchError::InvalidUrl(url.to_string()))?;
        Ok(PageDocument {
            url: url.to_string(),
            host,
            body_text: extract_text(&bytes, None),
            fetched_at: self.clock.now(),
            content_bytes_read: bytes.len() as u64,
        })
    }
}
