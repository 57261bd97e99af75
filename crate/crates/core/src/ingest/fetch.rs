//! The live HTTP(S) fetcher: politeness-limited, redirect-counted,
//! size-capped, charset-aware.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::debug;
use url::Url;

use super::text::extract_text;
use super::{FetchError, FetchPolicy, PageDocument, PageSource};
use crate::pipeline::clock::Clock;

/// Shared per-host politeness table. `reserve` atomically claims the next
/// allowed send slot for a host, so concurrent fetchers queue up behind
/// each other instead of hammering one origin.
#[derive(Debug)]
pub struct RateLimitTable {
    delay: Duration,
    slots: Mutex<HashMap<String, Instant>>,
}

impl RateLimitTable {
    pub fn new(delay: Duration) -> Self {
        RateLimitTable {
            delay,
            slots: Mutex::new(HashMap::new()),
        }
    }

    /// Claims and returns the instant at which the caller may contact
    /// `host`. Check-and-update runs under one lock acquisition.
    pub fn reserve(&self, host: &str) -> Instant {
        let mut slots = self.slots.lock().expect("rate limit table poisoned");
        let now = Instant::now();
        let at = match slots.get(host) {
            Some(prev) => (*prev + self.delay).max(now),
            None => now,
        };
        slots.insert(host.to_string(), at);
        at
    }

    /// Blocks until the host's reserved slot arrives.
    pub fn wait(&self, host: &str) {
        let at = self.reserve(host);
        let now = Instant::now();
        if at > now {
            std::thread::sleep(at - now);
        }
    }
}

/// Per-host robots.txt disallow rules for our user agent (or `*`).
#[derive(Debug, Clone, Default)]
struct RobotsRules {
    disallow: Vec<String>,
}

impl RobotsRules {
    fn allows(&self, path: &str) -> bool {
        !self
            .disallow
            .iter()
            .any(|prefix| !prefix.is_empty() && path.starts_with(prefix.as_str()))
    }
}

/// Minimal robots.txt parse: Disallow prefixes from groups whose
/// User-agent is `*` or contains our product token.
fn parse_robots(text: &str, user_agent: &str) -> RobotsRules {
    let product = user_agent
        .split('/')
        .next()
        .unwrap_or(user_agent)
        .to_ascii_lowercase();
    let mut rules = RobotsRules::default();
    let mut group_applies = false;
    let mut in_group_header = false;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((field, value)) = line.split_once(':') else {
            continue;
        };
        let field = field.trim().to_ascii_lowercase();
        let value = value.trim();
        match field.as_str() {
            "user-agent" => {
                let matches =
                    value == "*" || value.to_ascii_lowercase().contains(product.as_str());
                if in_group_header {
                    group_applies |= matches;
                } else {
                    group_applies = matches;
                    in_group_header = true;
                }
            }
            "disallow" => {
                in_group_header = false;
                if group_applies && !value.is_empty() {
                    rules.disallow.push(value.to_string());
                }
            }
            _ => {
                in_group_header = false;
            }
        }
    }
    rules
}

/// Fetches pages over HTTP(S) under a `FetchPolicy`: at most
/// `max_redirects` redirects followed manually, bodies truncated at
/// `max_body_bytes`, charset resolved header-then-meta-then-UTF-8.
pub struct HttpFetcher {
    client: reqwest::blocking::Client,
    policy: FetchPolicy,
    limiter: RateLimitTable,
    respect_robots: bool,
    robots_cache: Mutex<HashMap<String, RobotsRules>>,
    clock: Clock,
}

impl HttpFetcher {
    pub fn new(policy: FetchPolicy, respect_robots: bool, clock: Clock) -> Result<Self, FetchError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(policy.timeout())
            .redirect(reqwest::redirect::Policy::none())
            .user_agent(policy.user_agent.clone())
            .build()
            .map_err(|e| FetchError::TransportFailure(e.to_string()))?;
        Ok(HttpFetcher {
            client,
            limiter: RateLimitTable::new(policy.per_host_delay()),
            policy,
            respect_robots,
            robots_cache: Mutex::new(HashMap::new()),
            clock,
        })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    fn robots_for(&self, url: &Url) -> RobotsRules {
        let host_key = format!(
            "{}://{}",
            url.scheme(),
            url.host_str().unwrap_or_default()
        );
        if let Some(rules) = self
            .robots_cache
            .lock()
            .expect("robots cache poisoned")
            .get(&host_key)
        {
            return rules.clone();
        }
        let mut robots_url = url.clone();
        robots_url.set_path("/robots.txt");
        robots_url.set_query(None);
        robots_url.set_fragment(None);
        let rules = match self.client.get(robots_url.as_str()).send() {
            Ok(resp) if resp.status().is_success() => {
                let text = resp.text().unwrap_or_default();
                parse_robots(&text, &self.policy.user_agent)
            }
            // Missing or unreachable robots.txt allows everything.
            _ => RobotsRules::default(),
        };
        self.robots_cache
            .lock()
            .expect("robots cache poisoned")
            .insert(host_key, rules.clone());
        rules
    }

    fn fetch_inner(&self, url: &str) -> Result<PageDocument, FetchError> {
        let mut current = Url::parse(url).map_err(|_| FetchError::InvalidUrl(url.to_string()))?;
        if current.scheme() != "http" && current.scheme() != "https" {
            return Err(FetchError::UnsupportedScheme(current.scheme().to_string()));
        }
        let mut redirects = 0u32;

        loop {
            let host = current
                .host_str()
                .ok_or_else(|| FetchError::InvalidUrl(current.to_string()))?
                .to_string();
            if self.respect_robots && !self.robots_for(&current).allows(current.path()) {
                return Err(FetchError::RobotsDisallowed);
            }
            self.limiter.wait(&host);

            let response = self.client.get(current.as_str()).send().map_err(|e| {
                if e.is_timeout() {
                    FetchError::Timeout
                } else {
                    FetchError::TransportFailure(e.to_string())
                }
            })?;
            let status = response.status();

            if status.is_redirection() {
                let location = response
                    .headers()
                    .get(reqwest::header::LOCATION)
                    .and_then(|v| v.to_str().ok())
                    .ok_or_else(|| FetchError::HttpStatus(status.as_u16()))?;
                redirects += 1;
                if redirects > self.policy.max_redirects {
                    return Err(FetchError::TooManyRedirects);
                }
                current = current
                    .join(location)
                    .map_err(|_| FetchError::InvalidUrl(location.to_string()))?;
                debug!("redirect {redirects} -> {current}");
                continue;
            }
            if !status.is_success() {
                return Err(FetchError::HttpStatus(status.as_u16()));
            }

            let content_type = response
                .headers()
                .get(reqwest::header::CONTENT_TYPE)
                .and_then(|v| v.to_str().ok())
                .unwrap_or("")
                .to_string();
            if !is_texty(&content_type) {
                return Err(FetchError::NonHtmlContent(content_type));
            }
            let header_charset = charset_param(&content_type);

            let mut body = Vec::new();
            let mut reader = response.take(self.policy.max_body_bytes);
            reader
                .read_to_end(&mut body)
                .map_err(|e| map_read_err(&e))?;

            let final_host = current
                .host_str()
                .ok_or_else(|| FetchError::InvalidUrl(current.to_string()))?
                .trim_end_matches('.')
                .to_ascii_lowercase();
            return Ok(PageDocument {
                url: current.to_string(),
                host: final_host,
                body_text: extract_text(&body, header_charset.as_deref()),
                fetched_at: self.clock.now(),
                content_bytes_read: body.len() as u64,
            });
        }
    }
}

fn map_read_err(e: &std::io::Error) -> FetchError {
    if e.kind() == std::io::ErrorKind::TimedOut {
        FetchError::Timeout
    } else if e
        .get_ref()
        .map(|inner| inner.to_string().contains("timed out"))
        .unwrap_or(false)
    {
        FetchError::Timeout
    } else {
        FetchError::TransportFailure(e.to_string())
    }
}

impl PageSource for HttpFetcher {
    fn fetch_page(&self, url: &str) -> Result<PageDocument, FetchError> {
        self.fetch_inner(url)
    }
}

/// Only HTML and plain text get parsed; PDFs, images, and friends are
/// skipped. An absent content type is treated as HTML, best effort.
fn is_texty(content_type: &str) -> bool {
    let mime = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    mime.is_empty()
        || mime == "text/html"
        || mime == "application/xhtml+xml"
        || mime == "text/plain"
}

fn charset_param(content_type: &str) -> Option<String> {
    content_type.split(';').skip(1).find_map(|param| {
        let (key, value) = param.split_once('=')?;
        if key.trim().eq_ignore_ascii_case("charset") {
            Some(value.trim().trim_matches('"').to_string())
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserve_spaces_same_host_requests() {
        let table = RateLimitTable::new(Duration::from_millis(500));
        let first = table.reserve("a.example");
        let second = table.reserve("a.example");
        let third = table.reserve("a.example");
        assert!(second >= first + Duration::from_millis(500));
        assert!(third >= second + Duration::from_millis(500));
    }

    #[test]
    fn different_hosts_do_not_wait_on_each_other() {
        let table = RateLimitTable::new(Duration::from_secs(60));
        let before = Instant::now();
        table.reserve("a.example");
        let other = table.reserve("b.example");
        assert!(other <= before + Duration::from_secs(1));
    }

    #[test]
    fn reserve_is_race_free_across_threads() {
        let table = std::sync::Arc::new(RateLimitTable::new(Duration::from_millis(10)));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let table = std::sync::Arc::clone(&table);
            handles.push(std::thread::spawn(move || table.reserve("same.example")));
        }
        let mut slots: Vec<Instant> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        slots.sort();
        for pair in slots.windows(2) {
            assert!(pair[1] >= pair[0] + Duration::from_millis(10));
        }
    }

    #[test]
    fn content_type_gate() {
        assert!(is_texty("text/html; charset=utf-8"));
        assert!(is_texty("TEXT/PLAIN"));
        assert!(is_texty(""));
        assert!(!is_texty("application/pdf"));
        assert!(!is_texty("image/png"));
    }

    #[test]
    fn charset_param_extraction() {
        assert_eq!(
            charset_param("text/html; charset=GB2312"),
            Some("GB2312".to_string())
        );
        assert_eq!(
            charset_param("text/html; boundary=x; charset=\"utf-8\""),
            Some("utf-8".to_string())
        );
        assert_eq!(charset_param("text/html"), None);
    }

    #[test]
    fn robots_disallow_prefixes_for_star() {
        let rules = parse_robots(
            "User-agent: *\nDisallow: /private\nDisallow: /tmp\n\nUser-agent: othertool\nDisallow: /\n",
            "censorseek/0.1",
        );
        assert!(!rules.allows("/private/page"));
        assert!(!rules.allows("/tmp"));
        assert!(rules.allows("/public"));
    }

    #[test]
    fn robots_group_for_our_agent_applies() {
        let rules = parse_robots(
            "User-agent: censorseek\nDisallow: /only-us\n\nUser-agent: other\nDisallow: /\n",
            "censorseek/0.1",
        );
        assert!(!rules.allows("/only-us"));
        assert!(rules.allows("/anything-else"));
    }

    #[test]
    fn robots_empty_disallow_allows_all() {
        let rules = parse_robots("User-agent: *\nDisallow:\n", "censorseek/0.1");
        assert!(rules.allows("/anything"));
    }
}
