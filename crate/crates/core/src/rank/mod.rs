//! TF-IDF scoring of phrases against a background corpus.
//!
//! A phrase characterizes a page when it occurs often there (term
//! frequency) yet rarely across the corpus (document frequency). Phrases
//! the corpus has never seen get df = 0 rather than being dropped —
//! rare culture-specific phrases are exactly the valuable ones — so the
//! idf is smoothed to stay finite at df = 0.

pub mod corpus;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::segment::Phrase;

pub use corpus::{CorpusFrequencyProvider, LocalCorpus, RemoteCorpus};

/// Which inverse-document-frequency variant to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IdfFormula {
    /// ln((N + 1) / (df + 1)) + 1 — finite at df = 0, equals 1 at df = N.
    #[default]
    Smoothed,
    /// ln(N / max(df, 1)) + 1 — the classic form, df clamped away from 0.
    Plain,
}

impl IdfFormula {
    pub fn idf(self, df: u64, corpus_size: u64) -> f64 {
        match self {
            IdfFormula::Smoothed => {
                (((corpus_size + 1) as f64) / ((df + 1) as f64)).ln() + 1.0
            }
            IdfFormula::Plain => ((corpus_size as f64) / (df.max(1) as f64)).ln() + 1.0,
        }
    }
}

/// A phrase with its page frequency, corpus frequency, and final score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPhrase {
    pub phrase: Phrase,
    pub tf: u64,
    pub df: u64,
    pub score: f64,
}

/// Scores every phrase and sorts descending by score, ties broken by
/// descending tf and then ascending surface form. The total tie-break
/// makes every run reproducible.
pub fn score_phrases(
    counts: &HashMap<Phrase, u64>,
    provider: &dyn CorpusFrequencyProvider,
) -> Vec<ScoredPhrase> {
    score_phrases_with(counts, provider, IdfFormula::Smoothed)
}

pub fn score_phrases_with(
    counts: &HashMap<Phrase, u64>,
    provider: &dyn CorpusFrequencyProvider,
    formula: IdfFormula,
) -> Vec<ScoredPhrase> {
    let n = provider.corpus_size();
    let mut scored: Vec<ScoredPhrase> = counts
        .iter()
        .map(|(phrase, &tf)| {
            let df = provider.document_frequency(phrase.surface());
            ScoredPhrase {
                phrase: phrase.clone(),
                tf,
                df,
                score: tf as f64 * formula.idf(df, n),
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.tf.cmp(&a.tf))
            .then_with(|| a.phrase.surface().cmp(b.phrase.surface()))
    });
    scored
}

/// Takes the top `k` phrases not yet used as queries, preserving score
/// order. Never returns duplicates; underfull input returns what exists.
pub fn select_queries(scored: &[ScoredPhrase], k: usize, used: &HashSet<String>) -> Vec<Phrase> {
    let mut picked = Vec::with_capacity(k.min(scored.len()));
    let mut picked_surfaces: HashSet<&str> = HashSet::new();
    for s in scored {
        if picked.len() == k {
            break;
        }
        let surface = s.phrase.surface();
        if used.contains(surface) || picked_surfaces.contains(surface) {
            continue;
        }
        picked_surfaces.insert(surface);
        picked.push(s.phrase.clone());
    }
    picked
}
