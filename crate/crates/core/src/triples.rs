//! Knowledge triples: parsing them out of model output and rendering them
//! back as an embedding query or as prompt context.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TripleError {
    #[error("triple {0} is empty")]
    EmptyField(&'static str),
    #[error("triple {0} has unbalanced parentheses")]
    UnbalancedParens(&'static str),
}

/// A `(head, relation, tail)` fact. Fields are trimmed, non-empty and
/// paren-balanced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    head: String,
    relation: String,
    tail: String,
}

fn check_field(name: &'static str, value: &str) -> Result<String, TripleError> {
    let value = value.trim();
    if value.is_empty() {
        return Err(TripleError::EmptyField(name));
    }
    let mut depth = 0i32;
    for c in value.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(TripleError::UnbalancedParens(name));
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(TripleError::UnbalancedParens(name));
    }
    Ok(value.to_owned())
}

impl Triple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Result<Self, TripleError> {
        Ok(Self {
            head: check_field("head", head)?,
            relation: check_field("relation", relation)?,
            tail: check_field("tail", tail)?,
        })
    }

    pub fn head(&self) -> &str {
        &self.head
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn tail(&self) -> &str {
        &self.tail
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// Triples recovered from a piece of model output.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedTriples {
    pub triples: Vec<Triple>,
    /// Outermost parenthesized groups that were not exactly three fields.
    pub malformed: usize,
}

/// Extracts every outermost `( .. )` group with exactly two top-level commas.
///
/// Groups with any other comma count, or with an empty field, are skipped and
/// counted in [`ParsedTriples::malformed`]. Order and duplicates are kept.
pub fn parse_triples(text: &str) -> ParsedTriples {
    let mut out = ParsedTriples::default();
    let mut depth = 0usize;
    let mut group_start = 0usize;
    let mut commas: Vec<usize> = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '(' => {
                if depth == 0 {
                    group_start = i + 1;
                    commas.clear();
                }
                depth += 1;
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push_group(&text[group_start..i], &commas, group_start);
                }
            }
            ',' if depth == 1 => commas.push(i),
            _ => {}
        }
    }
    out
}

impl ParsedTriples {
    fn push_group(&mut self, inner: &str, commas: &[usize], offset: usize) {
        let [first, second] = commas else {
            self.malformed += 1;
            return;
        };
        let (a, b) = (first - offset, second - offset);
        match Triple::new(&inner[..a], &inner[a + 1..b], &inner[b + 1..]) {
            Ok(t) => self.triples.push(t),
            Err(_) => self.malformed += 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderStyle {
    /// One line, triples joined by `", "`; used as the selection query.
    Query,
    /// One triple per line; used inside prompts.
    Prompt,
}

pub fn render_triples(triples: &[Triple], style: RenderStyle) -> String {
    let sep = match style {
        RenderStyle::Query => ", ",
        RenderStyle::Prompt => "\n",
    };
    triples
        .iter()
        .map(Triple::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}
