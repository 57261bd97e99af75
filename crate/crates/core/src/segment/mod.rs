//! Tokenization of mixed Chinese/Latin text.
//!
//! Chinese is written without spaces, so Han runs are segmented by forward
//! maximum matching against a word dictionary: repeatedly take the longest
//! dictionary prefix, falling back to a single character. Latin runs split
//! on whitespace and punctuation. Punctuation itself never becomes a token;
//! it is emitted as a sentence-boundary marker that n-grams must not cross.

pub mod ngram;

use std::collections::HashSet;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ngram::{extract_ngrams, NgramMode, Phrase};

/// Which writing system a token belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Script {
    /// Every character is a CJK Unified Ideograph.
    Han,
    /// Every character is basic-Latin alphanumeric.
    Latin,
    /// Anything else (kana, Cyrillic, accented Latin, ...).
    Other,
}

/// One unigram as produced by the segmenter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub script: Script,
}

impl Token {
    pub fn new(text: impl Into<String>, script: Script) -> Self {
        Token {
            text: text.into(),
            script,
        }
    }

    pub fn han(text: impl Into<String>) -> Self {
        Token::new(text, Script::Han)
    }

    pub fn latin(text: impl Into<String>) -> Self {
        Token::new(text, Script::Latin)
    }
}

/// Segmenter output element: a token or a sentence-boundary marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Token(Token),
    Boundary,
}

impl Segment {
    pub fn as_token(&self) -> Option<&Token> {
        match self {
            Segment::Token(t) => Some(t),
            Segment::Boundary => None,
        }
    }
}

/// The word list driving forward maximum matching over Han runs.
/// Immutable after load; safe to share across threads.
#[derive(Debug, Clone, Default)]
pub struct SegmenterDictionary {
    entries: HashSet<String>,
    max_word_len: usize,
}

impl SegmenterDictionary {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut dict = Self::default();
        for word in words {
            dict.insert(word.into());
        }
        dict
    }

    /// Loads a dictionary file: UTF-8, one word per line, `#` comment lines
    /// and blank lines ignored.
    pub fn load(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string),
        ))
    }

    fn insert(&mut self, word: String) {
        let word = word.trim().to_string();
        if word.is_empty() {
            return;
        }
        self.max_word_len = self.max_word_len.max(word.chars().count());
        self.entries.insert(word);
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains(word)
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// True for every CJK Unified Ideographs block (base, extensions, compat).
pub fn is_han(c: char) -> bool {
    matches!(u32::from(c),
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0x2CEB0..=0x2EBEF
        | 0x2F800..=0x2FA1F)
}

fn is_latin(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

/// Punctuation, ASCII and CJK/fullwidth. These end sentences for n-gram
/// purposes and never appear inside tokens.
fn is_punctuation(c: char) -> bool {
    if c.is_ascii_punctuation() {
        return true;
    }
    matches!(u32::from(c),
        0x00A1..=0x00BF          // Latin-1 punctuation and symbols
        | 0x2000..=0x206F        // general punctuation (quotes, dashes, ellipsis)
        | 0x2E00..=0x2E7F        // supplemental punctuation
        | 0x3000..=0x303F        // CJK symbols and punctuation
        | 0xFE30..=0xFE4F        // CJK compatibility forms
        | 0xFF00..=0xFF0F        // fullwidth ! " # ... /
        | 0xFF1A..=0xFF20        // fullwidth : ; < ... @
        | 0xFF3B..=0xFF40        // fullwidth [ \ ] ^ _ `
        | 0xFF5B..=0xFF65)       // fullwidth { | } ~ and halfwidth 。「」
}

fn is_boundary(c: char) -> bool {
    is_punctuation(c) || c == '\n' || c == '\r'
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Han,
    Latin,
    Other,
}

fn classify(c: char) -> CharClass {
    if is_han(c) {
        CharClass::Han
    } else if is_latin(c) {
        CharClass::Latin
    } else {
        CharClass::Other
    }
}

/// Splits `text` into tokens and boundary markers.
///
/// Latin runs become Latin tokens as-is; Han runs go through forward
/// maximum matching against `dict` (longest dictionary prefix wins,
/// unmatched characters fall back to single-character tokens); anything
/// else groups into Other tokens. Consecutive boundaries collapse to one
/// marker. Deterministic: identical text and dictionary give identical
/// output.
pub fn segment(text: &str, dict: &SegmenterDictionary) -> Vec<Segment> {
    let chars: Vec<char> = text.chars().collect();
    let mut out: Vec<Segment> = Vec::new();
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if is_boundary(c) {
            if !matches!(out.last(), Some(Segment::Boundary)) {
                out.push(Segment::Boundary);
            }
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let class = classify(c);
        let start = i;
        while i < chars.len()
            && classify(chars[i]) == class
            && !is_boundary(chars[i])
            && !chars[i].is_whitespace()
        {
            i += 1;
        }
        let run = &chars[start..i];
        match class {
            CharClass::Han => segment_han_run(run, dict, &mut out),
            CharClass::Latin => out.push(Segment::Token(Token::new(
                run.iter().collect::<String>(),
                Script::Latin,
            ))),
            CharClass::Other => out.push(Segment::Token(Token::new(
                run.iter().collect::<String>(),
                Script::Other,
            ))),
        }
    }
    out
}

/// Forward maximum matching over one contiguous Han run.
fn segment_han_run(run: &[char], dict: &SegmenterDictionary, out: &mut Vec<Segment>) {
    let mut j = 0;
    while j < run.len() {
        let longest = dict.max_word_len().min(run.len() - j);
        let mut matched = 1;
        for len in (2..=longest).rev() {
            let candidate: String = run[j..j + len].iter().collect();
            if dict.contains(&candidate) {
                matched = len;
                break;
            }
        }
        out.push(Segment::Token(Token::new(
            run[j..j + matched].iter().collect::<String>(),
            Script::Han,
        )));
        j += matched;
    }
}

/// Convenience for tests and callers that don't care about boundaries.
pub fn tokens_of(segments: &[Segment]) -> Vec<&Token> {
    segments.iter().filter_map(Segment::as_token).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(segments: &[Segment]) -> Vec<String> {
        tokens_of(segments).iter().map(|t| t.text.clone()).collect()
    }

    #[test]
    fn dictionary_word_stays_whole() {
        let dict = SegmenterDictionary::from_words(["特首"]);
        let segs = segment("特首", &dict);
        assert_eq!(surfaces(&segs), vec!["特首"]);
        assert_eq!(segs[0].as_token().unwrap().script, Script::Han);
    }

    #[test]
    fn empty_dictionary_falls_back_to_characters() {
        let segs = segment("特首", &SegmenterDictionary::empty());
        assert_eq!(surfaces(&segs), vec!["特", "首"]);
    }

    #[test]
    fn forward_maximum_matching_on_six_characters() {
        let dict = SegmenterDictionary::from_words(["自由", "亚洲", "电台"]);
        assert_eq!(
            surfaces(&segment("自由亚洲电台", &dict)),
            vec!["自由", "亚洲", "电台"]
        );
    }

    #[test]
    fn greedy_longest_prefix_wins() {
        // 中国人 is preferred over 中国 at the same start.
        let dict = SegmenterDictionary::from_words(["中国", "中国人", "民共", "和国"]);
        assert_eq!(
            surfaces(&segment("中国人民共和国", &dict)),
            vec!["中国人", "民共", "和国"]
        );
    }

    #[test]
    fn latin_splits_on_whitespace() {
        let segs = segment("Chinese human rights violation", &SegmenterDictionary::empty());
        assert_eq!(
            surfaces(&segs),
            vec!["Chinese", "human", "rights", "violation"]
        );
        assert!(tokens_of(&segs).iter().all(|t| t.script == Script::Latin));
    }

    #[test]
    fn punctuation_becomes_boundary_not_token() {
        let segs = segment("天安门。广场", &SegmenterDictionary::empty());
        assert_eq!(
            segs.iter().filter(|s| **s == Segment::Boundary).count(),
            1
        );
        assert_eq!(surfaces(&segs), vec!["天", "安", "门", "广", "场"]);
    }

    #[test]
    fn mixed_script_text_keeps_order() {
        let dict = SegmenterDictionary::from_words(["审查"]);
        let segs = segment("Vimeo在中国被审查", &dict);
        assert_eq!(
            surfaces(&segs),
            vec!["Vimeo", "在", "中", "国", "被", "审查"]
        );
    }

    #[test]
    fn newline_is_a_boundary() {
        let segs = segment("a b\nc", &SegmenterDictionary::empty());
        assert_eq!(
            segs.iter().filter(|s| **s == Segment::Boundary).count(),
            1
        );
    }

    #[test]
    fn empty_text_gives_empty_output() {
        assert!(segment("", &SegmenterDictionary::empty()).is_empty());
    }

    #[test]
    fn consecutive_boundaries_collapse() {
        let segs = segment("了。！？到", &SegmenterDictionary::empty());
        assert_eq!(
            segs.iter().filter(|s| **s == Segment::Boundary).count(),
            1
        );
    }

    #[test]
    fn segmentation_preserves_non_punctuation_characters() {
        let dict = SegmenterDictionary::from_words(["自由", "亚洲"]);
        let input = "自由亚洲 radio, 电台！2024";
        let concatenated: String = tokens_of(&segment(input, &dict))
            .iter()
            .map(|t| t.text.as_str())
            .collect();
        let expected: String = input
            .chars()
            .filter(|c| !c.is_whitespace() && !is_punctuation(*c))
            .collect();
        assert_eq!(concatenated, expected);
    }

    #[test]
    fn dictionary_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dict.txt");
        std::fs::write(&path, "# comment\n特首\n自由\n\n亚洲\n").unwrap();
        let dict = SegmenterDictionary::load(&path).unwrap();
        assert_eq!(dict.len(), 3);
        assert!(dict.contains("特首"));
        assert!(!dict.contains("# comment"));
        assert_eq!(dict.max_word_len(), 2);
    }
}
