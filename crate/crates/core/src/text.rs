//! Deterministic text utilities: sentence segmentation, approximate token
//! counting and truncation, and answer normalization for exact match.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A sentence of a source document.
///
/// `span` is a byte range into the document the sentence was split from;
/// `text` is always `&document[span]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub span: (usize, usize),
}

impl Sentence {
    pub fn byte_range(&self) -> Range<usize> {
        self.span.0..self.span.1
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("token budget must be at least 1")]
pub struct ZeroBudget;

/// Upper bound on the number of approximate tokens of an evidence document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct TokenBudget(usize);

impl TokenBudget {
    pub const DEFAULT: TokenBudget = TokenBudget(300);

    pub fn new(max_tokens: usize) -> Result<Self, ZeroBudget> {
        if max_tokens == 0 {
            Err(ZeroBudget)
        } else {
            Ok(Self(max_tokens))
        }
    }

    pub fn max_tokens(self) -> usize {
        self.0
    }
}

impl Default for TokenBudget {
    fn default() -> Self {
        Self::DEFAULT
    }
}

impl TryFrom<usize> for TokenBudget {
    type Error = ZeroBudget;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<TokenBudget> for usize {
    fn from(value: TokenBudget) -> Self {
        value.0
    }
}

impl std::fmt::Display for TokenBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

// ---------------------------------------------------------------------------
// Sentence segmentation
// ---------------------------------------------------------------------------

/// Lowercased tokens (including their trailing period) that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "mt.", "ft.", "no.", "nos.",
    "vs.", "etc.", "e.g.", "i.e.", "cf.", "approx.", "inc.", "ltd.", "co.", "corp.", "gen.",
    "col.", "lt.", "sgt.", "capt.", "cmdr.", "adm.", "gov.", "sen.", "rep.", "pres.", "rev.",
    "hon.", "fig.", "vol.", "ch.", "art.", "dept.", "est.", "jan.", "feb.", "mar.", "apr.",
    "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "u.s.", "u.k.", "u.n.",
    "u.s.a.", "d.c.", "a.m.", "p.m.", "ph.d.", "b.c.", "a.d.",
];

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\u{201D}' | '\u{2019}' | '\'' | ')' | ']' | '}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\u{201C}' | '\u{2018}' | '\'' | '(' | '[' | '{')
}

/// Byte ranges strictly inside matched bracket or double-quote pairs.
fn protected_ranges(doc: &str) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut stack: Vec<(char, usize)> = Vec::new();
    let mut straight_quote: Option<usize> = None;
    let mut curly_quote: Option<usize> = None;
    for (i, c) in doc.char_indices() {
        match c {
            '(' | '[' | '{' => stack.push((c, i + c.len_utf8())),
            ')' | ']' | '}' => {
                let open = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                // Unbalanced closers are ignored; a mismatched closer pops
                // back to its opener if one is on the stack.
                if let Some(pos) = stack.iter().rposition(|&(o, _)| o == open) {
                    let start = stack[pos].1;
                    stack.truncate(pos);
                    ranges.push(start..i);
                }
            }
            '"' => match straight_quote.take() {
                Some(start) => ranges.push(start..i),
                None => straight_quote = Some(i + 1),
            },
            '\u{201C}' => curly_quote = Some(i + c.len_utf8()),
            '\u{201D}' => {
                if let Some(start) = curly_quote.take() {
                    ranges.push(start..i);
                }
            }
            _ => {}
        }
    }
    ranges
}

fn is_abbreviation(doc: &str, period_at: usize) -> bool {
    let word_start = doc[..period_at]
        .char_indices()
        .rev()
        .find(|&(_, c)| c.is_whitespace() || is_opener(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    let word = &doc[word_start..=period_at];
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials ("J. R. R. Tolkien").
    let mut chars = word.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Splits `document` into sentences.
///
/// A boundary is placed after a run of `.`, `!` or `?` (plus any closing
/// quotes or brackets that immediately follow) when the next non-space
/// character is uppercase, a digit, or an opening quote/bracket. Periods
/// that end a known abbreviation or a single-letter initial never split,
/// and nothing splits inside matched quotes or brackets. A blank line is
/// always a boundary.
pub fn split_sentences(document: &str) -> Vec<Sentence> {
    let protected = protected_ranges(document);
    let inside = |pos: usize| protected.iter().any(|r| r.start <= pos && pos < r.end);

    let chars: Vec<(usize, char)> = document.char_indices().collect();
    let mut cuts: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c == '\n' {
            // Blank line: newline, optional horizontal space, newline.
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() && chars[j].1 != '\n' {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                cuts.push(pos);
                i = j;
                continue;
            }
            i += 1;
            continue;
        }
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let single_period = j - run_start == 1 && c == '.';
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(document.len(), |&(p, _)| p);
        i = j;

        if inside(end) {
            continue;
        }
        if single_period && is_abbreviation(document, pos) {
            continue;
        }
        // Must be followed by whitespace, then a sentence-opening character.
        let mut k = j;
        let mut saw_space = false;
        while k < chars.len() && chars[k].1.is_whitespace() {
            saw_space = true;
            k += 1;
        }
        if k == chars.len() {
            cuts.push(end);
            continue;
        }
        let next = chars[k].1;
        if saw_space && (next.is_uppercase() || next.is_ascii_digit() || is_opener(next)) {
            cuts.push(end);
        }
    }

    let mut sentences = Vec::new();
    let mut start = 0;
    cuts.push(document.len());
    for cut in cuts {
        if cut <= start {
            continue;
        }
        push_trimmed(document, start, cut, &mut sentences);
        start = cut;
    }
    sentences
}

fn push_trimmed(doc: &str, start: usize, end: usize, out: &mut Vec<Sentence>) {
    let segment = &doc[start..end];
    let trimmed_start = segment.len() - segment.trim_start().len();
    let trimmed = segment.trim();
    if trimmed.is_empty() {
        return;
    }
    let s = start + trimmed_start;
    let e = s + trimmed.len();
    out.push(Sentence {
        index: out.len(),
        text: trimmed.to_owned(),
        span: (s, e),
    });
}

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Byte ranges of the approximate tokens of `text`.
///
/// Text is split on whitespace; within each chunk a leading run and a
/// trailing run of punctuation each form their own token. A chunk made
/// only of punctuation is a single token.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut chunk_start: Option<usize> = None;
    for (i, c) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        if c.is_whitespace() {
            if let Some(s) = chunk_start.take() {
                chunk_tokens(text, s, i, &mut spans);
            }
        } else if chunk_start.is_none() {
            chunk_start = Some(i);
        }
    }
    spans
}

fn chunk_tokens(text: &str, start: usize, end: usize, spans: &mut Vec<Range<usize>>) {
    let chunk = &text[start..end];
    let Some(first_word) = chunk.find(|c: char| !is_punct(c)) else {
        spans.push(start..end);
        return;
    };
    // `rfind` returns the byte index of the last word char's first byte.
    let last_word = chunk.rfind(|c: char| !is_punct(c)).unwrap();
    let last_word_end = last_word + chunk[last_word..].chars().next().unwrap().len_utf8();
    if first_word > 0 {
        spans.push(start..start + first_word);
    }
    spans.push(start + first_word..start + last_word_end);
    if last_word_end < chunk.len() {
        spans.push(start + last_word_end..end);
    }
}

pub fn count_tokens(text: &str) -> usize {
    token_spans(text).len()
}

/// Longest prefix of `text` that ends on a token boundary and holds at most
/// `budget` tokens. Text already within budget is returned unchanged.
pub fn truncate_tokens(text: &str, budget: TokenBudget) -> &str {
    let spans = token_spans(text);
    if spans.len() <= budget.max_tokens() {
        return text;
    }
    &text[..spans[budget.max_tokens() - 1].end]
}

// ---------------------------------------------------------------------------
// Answer normalization
// ---------------------------------------------------------------------------

/// Open-domain QA answer normalization: lowercase, drop punctuation, drop the
/// articles "a", "an", "the", collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered.chars().filter(|&c| !is_punct(c)).collect();
    stripped
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}
