//! Best-effort HTML-to-text extraction.
//!
//! Total over arbitrary byte input: malformed markup degrades to text, it
//! never errors. Tags, script/style bodies, and comments are removed,
//! whitespace runs collapse to single spaces, and sentence punctuation is
//! preserved because it feeds sentence boundaries downstream.

use encoding_rs::{Encoding, UTF_8};

/// Charset resolution order: HTTP header, then the document's meta
/// declaration, then UTF-8; decoding is always lossy. Chinese sites
/// commonly serve GBK/GB2312, so the header/meta labels matter.
pub fn extract_text(html_bytes: &[u8], declared_charset: Option<&str>) -> String {
    let encoding = declared_charset
        .and_then(|label| Encoding::for_label(label.trim().as_bytes()))
        .or_else(|| sniff_meta_charset(html_bytes))
        .unwrap_or(UTF_8);
    let (decoded, _, _) = encoding.decode(html_bytes);
    strip_markup(&decoded)
}

/// Scans the first 2 KiB for `<meta charset=...>` or the `charset=`
/// parameter of a `http-equiv` content attribute. The declaration is
/// ASCII either way, so a byte scan is safe before decoding.
fn sniff_meta_charset(bytes: &[u8]) -> Option<&'static Encoding> {
    let window = &bytes[..bytes.len().min(2048)];
    let lower: Vec<u8> = window.iter().map(|b| b.to_ascii_lowercase()).collect();
    let mut search_from = 0;
    while let Some(rel) = find(&lower[search_from..], b"charset") {
        let mut pos = search_from + rel + b"charset".len();
        while lower.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            pos += 1;
        }
        if lower.get(pos) != Some(&b'=') {
            search_from += rel + 1;
            continue;
        }
        pos += 1;
        while lower
            .get(pos)
            .is_some_and(|b| b.is_ascii_whitespace() || *b == b'"' || *b == b'\'')
        {
            pos += 1;
        }
        let start = pos;
        while lower
            .get(pos)
            .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'-' || *b == b'_')
        {
            pos += 1;
        }
        if pos > start {
            if let Some(enc) = Encoding::for_label(&lower[start..pos]) {
                return Some(enc);
            }
        }
        search_from += rel + 1;
    }
    None
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

/// Removes tags, script/style content, and comments; decodes common
/// entities; collapses whitespace. Deterministic and total.
pub fn strip_markup(html: &str) -> String {
    let chars: Vec<char> = html.chars().collect();
    let mut out = String::with_capacity(html.len() / 2);
    let mut pending_space = false;
    let mut i = 0;

    let mut push_text = |out: &mut String, pending: &mut bool, c: char| {
        if c.is_whitespace() {
            *pending = true;
            return;
        }
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
        out.push(c);
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '<' {
            match tag_at(&chars, i) {
                TagKind::Comment => {
                    // Comments vanish without leaving a word break.
                    i = skip_until(&chars, i + 4, "-->");
                    continue;
                }
                TagKind::Declaration => {
                    i = skip_past_tag_end(&chars, i + 1);
                    pending_space = true;
                    continue;
                }
                TagKind::Element { name, closing } => {
                    i = skip_past_tag_end(&chars, i + 1);
                    pending_space = true;
                    if !closing && (name == "script" || name == "style") {
                        i = skip_raw_text(&chars, i, &name);
                    }
                    continue;
                }
                TagKind::NotATag => {
                    push_text(&mut out, &mut pending_space, c);
                    i += 1;
                }
            }
        } else if c == '&' {
            let (decoded, consumed) = decode_entity(&chars[i..]);
            match decoded {
                Some(d) => {
                    push_text(&mut out, &mut pending_space, d);
                    i += consumed;
                }
                None => {
                    push_text(&mut out, &mut pending_space, c);
                    i += 1;
                }
            }
        } else {
            push_text(&mut out, &mut pending_space, c);
            i += 1;
        }
    }
    out
}

enum TagKind {
    Element { name: String, closing: bool },
    Comment,
    Declaration,
    NotATag,
}

/// Decides whether the `<` at `pos` opens markup. Following HTML5 rules,
/// a `<` only starts a tag before an ASCII letter, `/`, `!`, or `?`.
fn tag_at(chars: &[char], pos: usize) -> TagKind {
    match chars.get(pos + 1) {
        Some('!') => {
            if chars.get(pos + 2) == Some(&'-') && chars.get(pos + 3) == Some(&'-') {
                TagKind::Comment
            } else {
                TagKind::Declaration
            }
        }
        Some('?') => TagKind::Declaration,
        Some('/') => {
            let name = read_tag_name(chars, pos + 2);
            if name.is_empty() {
                TagKind::NotATag
            } else {
                TagKind::Element {
                    name,
                    closing: true,
                }
            }
        }
        Some(c) if c.is_ascii_alphabetic() => TagKind::Element {
            name: read_tag_name(chars, pos + 1),
            closing: false,
        },
        _ => TagKind::NotATag,
    }
}

fn read_tag_name(chars: &[char], mut pos: usize) -> String {
    let mut name = String::new();
    while let Some(c) = chars.get(pos) {
        if c.is_ascii_alphanumeric() {
            name.push(c.to_ascii_lowercase());
            pos += 1;
        } else {
            break;
        }
    }
    name
}

/// Advances past the closing `>` of a tag, honoring quoted attribute
/// values. An unterminated tag swallows the rest of the input.
fn skip_past_tag_end(chars: &[char], mut pos: usize) -> usize {
    let mut quote: Option<char> = None;
    while pos < chars.len() {
        let c = chars[pos];
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '>' => return pos + 1,
            None => {}
        }
        pos += 1;
    }
    pos
}

/// Skips raw text content until the matching close tag, then past its `>`.
fn skip_raw_text(chars: &[char], mut pos: usize, name: &str) -> usize {
    let close: Vec<char> = format!("</{name}").chars().collect();
    while pos < chars.len() {
        if chars[pos] == '<'
            && pos + close.len() <= chars.len()
            && chars[pos..pos + close.len()]
                .iter()
                .zip(&close)
                .all(|(a, b)| a.eq_ignore_ascii_case(b))
        {
            return skip_past_tag_end(chars, pos + 1);
        }
        pos += 1;
    }
    pos
}

fn skip_until(chars: &[char], mut pos: usize, marker: &str) -> usize {
    let marker: Vec<char> = marker.chars().collect();
    while pos < chars.len() {
        if pos + marker.len() <= chars.len() && chars[pos..pos + marker.len()] == marker[..] {
            return pos + marker.len();
        }
        pos += 1;
    }
    pos
}

/// Decodes `&name;`, `&#123;`, and `&#x1F;` forms. Returns the decoded
/// character and how many input chars were consumed; None leaves the
/// ampersand as literal text.
fn decode_entity(chars: &[char]) -> (Option<char>, usize) {
    let semi = chars
        .iter()
        .take(32)
        .position(|c| *c == ';');
    let Some(semi) = semi else {
        return (None, 1);
    };
    let body: String = chars[1..semi].iter().collect();
    let decoded = if let Some(num) = body.strip_prefix('#') {
        let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()
        } else {
            num.parse().ok()
        };
        code.and_then(char::from_u32)
    } else {
        match body.as_str() {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ => None,
        }
    };
    match decoded {
        Some(c) => (Some(c), semi + 1),
        None => (None, 1),
    }
}
