//! N-gram phrases over segmented token streams.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Script, Segment, Token};

/// Which phrase length a run extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NgramMode {
    Unigram,
    Bigram,
    Trigram,
}

impl NgramMode {
    pub fn n(self) -> usize {
        match self {
            NgramMode::Unigram => 1,
            NgramMode::Bigram => 2,
            NgramMode::Trigram => 3,
        }
    }
}

impl fmt::Display for NgramMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NgramMode::Unigram => "unigram",
            NgramMode::Bigram => "bigram",
            NgramMode::Trigram => "trigram",
        })
    }
}

impl FromStr for NgramMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "unigram" | "1" => Ok(NgramMode::Unigram),
            "bigram" | "2" => Ok(NgramMode::Bigram),
            "trigram" | "3" => Ok(NgramMode::Trigram),
            other => Err(format!("unknown ngram mode {other:?}")),
        }
    }
}

/// A 1–3 token phrase. The canonical surface form joins token texts with
/// single spaces; since tokens never contain whitespace, the surface
/// uniquely identifies the token sequence, so equality and hashing go
/// through it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phrase {
    tokens: Vec<Token>,
    surface: String,
}

impl Phrase {
    /// Builds a phrase from 1–3 tokens. Returns None outside that range.
    pub fn new(tokens: Vec<Token>) -> Option<Self> {
        if tokens.is_empty() || tokens.len() > 3 {
            return None;
        }
        let surface = tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        Some(Phrase { tokens, surface })
    }

    pub fn n(&self) -> usize {
        self.tokens.len()
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }
}

impl PartialEq for Phrase {
    fn eq(&self, other: &Self) -> bool {
        self.surface == other.surface
    }
}

impl Eq for Phrase {}

impl std::hash::Hash for Phrase {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.surface.hash(state);
    }
}

impl PartialOrd for Phrase {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Phrase {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.surface.cmp(&other.surface)
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// Tokens that generate useless search queries and disqualify any window
/// containing them: pure digits and single Latin letters.
pub fn is_stop_token(token: &Token) -> bool {
    let mut chars = token.text.chars();
    let all_digits = token.text.chars().all(|c| c.is_ascii_digit());
    if all_digits {
        return true;
    }
    if token.script == Script::Latin {
        if let (Some(c), None) = (chars.next(), chars.next()) {
            return c.is_ascii_alphabetic();
        }
    }
    false
}

/// Counts every contiguous n-token window that stays inside one sentence.
/// Windows containing a stop token are discarded.
pub fn extract_ngrams(segments: &[Segment], mode: NgramMode) -> HashMap<Phrase, u64> {
    let n = mode.n();
    let mut counts: HashMap<Phrase, u64> = HashMap::new();
    let mut sentence: Vec<&Token> = Vec::new();

    let mut flush = |sentence: &mut Vec<&Token>| {
        if sentence.len() >= n {
            for window in sentence.windows(n) {
                if window.iter().any(|t| is_stop_token(t)) {
                    continue;
                }
                let phrase = Phrase::new(window.iter().map(|t| (*t).clone()).collect())
                    .expect("window length is 1..=3");
                *counts.entry(phrase).or_insert(0) += 1;
            }
        }
        sentence.clear();
    };

    for segment in segments {
        match segment {
            Segment::Token(t) => sentence.push(t),
            Segment::Boundary => flush(&mut sentence),
        }
    }
    flush(&mut sentence);
    counts
}
