//! Document-frequency sources: a local frequency table for offline and
//! test use, and a remote lookup client with an on-disk cache mirroring
//! a phrase-frequency web service.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use log::warn;
use thiserror::Error;

/// Looks up how many corpus documents contain a phrase.
pub trait CorpusFrequencyProvider: Send + Sync {
    /// Documents containing the phrase; 0 when the corpus has never seen it.
    fn document_frequency(&self, surface: &str) -> u64;
    /// Total documents N in the corpus.
    fn corpus_size(&self) -> u64;
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file is missing the `#N <corpus_size>` header")]
    MissingHeader,
    #[error("corpus line {line}: expected `<phrase>\\t<df>`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("corpus line {line}: df {df} exceeds corpus size {n}")]
    FrequencyAboveCorpusSize { line: usize, df: u64, n: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A frequency table loaded from a `<phrase>\t<df>` file with a
/// `#N <corpus_size>` header. Deterministic and offline.
#[derive(Debug, Clone)]
pub struct LocalCorpus {
    frequencies: HashMap<String, u64>,
    corpus_size: u64,
}

impl LocalCorpus {
    pub fn new(corpus_size: u64, frequencies: HashMap<String, u64>) -> Self {
        LocalCorpus {
            frequencies,
            corpus_size: corpus_size.max(1),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut corpus_size: Option<u64> = None;
        let mut frequencies = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#N") {
                corpus_size = Some(rest.trim().parse().map_err(|_| CorpusError::BadLine {
                    line: line_no,
                    text: line.to_string(),
                })?);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let (phrase, df_text) = line.split_once('\t').ok_or_else(|| CorpusError::BadLine {
                line: line_no,
                text: line.to_string(),
            })?;
            let df: u64 = df_text.trim().parse().map_err(|_| CorpusError::BadLine {
                line: line_no,
                text: line.to_string(),
            })?;
            if let Some(n) = corpus_size {
                if df > n {
                    return Err(CorpusError::FrequencyAboveCorpusSize {
                        line: line_no,
                        df,
                        n,
                    });
                }
            }
            frequencies.insert(phrase.to_string(), df);
        }
        let corpus_size = corpus_size.ok_or(CorpusError::MissingHeader)?;
        if let Some((_, &df)) = frequencies.iter().find(|(_, &df)| df > corpus_size) {
            return Err(CorpusError::FrequencyAboveCorpusSize {
                line: 0,
                df,
                n: corpus_size,
            });
        }
        Ok(LocalCorpus {
            frequencies,
            corpus_size,
        })
    }
}

impl CorpusFrequencyProvider for LocalCorpus {
    fn document_frequency(&self, surface: &str) -> u64 {
        self.frequencies.get(surface).copied().unwrap_or(0)
    }

    fn corpus_size(&self) -> u64 {
        self.corpus_size
    }
}

/// HTTP lookup against a phrase-frequency service, with an on-disk cache.
/// Lookups may run concurrently; cache writes are serialized. Any failure
/// degrades to df = 0 with a logged warning — a miss must never stall or
/// kill a run.
pub struct RemoteCorpus {
    endpoint: String,
    query_param: String,
    corpus_size: u64,
    client: reqwest::blocking::Client,
    cache: RwLock<HashMap<String, u64>>,
    cache_writer: Option<Mutex<File>>,
}

impl RemoteCorpus {
    pub fn new(
        endpoint: &str,
        query_param: &str,
        corpus_size: u64,
        cache_path: Option<PathBuf>,
        timeout: Duration,
    ) -> Result<Self, std::io::Error> {
        let mut cache = HashMap::new();
        let cache_writer = match cache_path {
            Some(path) => {
                if let Ok(text) = std::fs::read_to_string(&path) {
                    for line in text.lines() {
                        if let Some((phrase, df)) = line.split_once('\t') {
                            if let Ok(df) = df.trim().parse() {
                                cache.insert(phrase.to_string(), df);
                            }
                        }
                    }
                }
                let file = OpenOptions::new().create(true).append(true).open(&path)?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(RemoteCorpus {
            endpoint: endpoint.to_string(),
            query_param: query_param.to_string(),
            corpus_size: corpus_size.max(1),
            client,
            cache: RwLock::new(cache),
            cache_writer,
        })
    }

    fn fetch_remote(&self, surface: &str) -> Option<u64> {
        let response = self
            .client
            .get(&self.endpoint)
            .query(&[(self.query_param.as_str(), surface)])
            .send()
            .ok()?;
        if !response.status().is_success() {
            return None;
        }
        let body = response.text().ok()?;
        parse_frequency(&body)
    }

    fn remember(&self, surface: &str, df: u64) {
        self.cache
            .write()
            .expect("corpus cache poisoned")
            .insert(surface.to_string(), df);
        if let Some(writer) = &self.cache_writer {
            let mut file = writer.lock().expect("corpus cache file poisoned");
            let _ = writeln!(file, "{surface}\t{df}");
        }
    }
}

impl CorpusFrequencyProvider for RemoteCorpus {
    fn document_frequency(&self, surface: &str) -> u64 {
        if let Some(df) = self
            .cache
            .read()
            .expect("corpus cache poisoned")
            .get(surface)
        {
            return *df;
        }
        match self.fetch_remote(surface) {
            Some(df) => {
                let df = df.min(self.corpus_size);
                self.remember(surface, df);
                df
            }
            None => {
                warn!("corpus lookup failed for {surface:?}; treating df as 0");
                self.remember(surface, 0);
                0
            }
        }
    }

    fn corpus_size(&self) -> u64 {
        self.corpus_size
    }
}

/// Pulls a single integer frequency out of a response body: the whole
/// trimmed body, or failing that the first integer token in it.
fn parse_frequency(body: &str) -> Option<u64> {
    let trimmed = body.trim();
    if let Ok(v) = trimmed.parse() {
        return Some(v);
    }
    let mut current = String::new();
    for c in trimmed.chars() {
        if c.is_ascii_digit() {
            current.push(c);
        } else if !current.is_empty() {
            break;
        }
    }
    current.parse().ok()
}
