//! Evidence sentence selection: embed a query and every sentence of a
//! document, keep the `k` sentences closest to the query in Euclidean
//! distance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cached_embed, euclidean_distance, EmbedError, Embedder, EmbeddingCache};
use crate::text::Sentence;
use crate::triples::{render_triples, RenderStyle, Triple};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("selection query text is empty")]
    EmptyQuery,
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryMode {
    Triples,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionQuery {
    mode: QueryMode,
    text: String,
}

impl SelectionQuery {
    /// The whole triple set rendered on one line and embedded as one query.
    pub fn from_triples(triples: &[Triple]) -> Result<Self, SelectionError> {
        Self::new(QueryMode::Triples, render_triples(triples, RenderStyle::Query))
    }

    pub fn from_question(question: &str) -> Result<Self, SelectionError> {
        Self::new(QueryMode::Question, question.to_owned())
    }

    pub fn new(mode: QueryMode, text: String) -> Result<Self, SelectionError> {
        if text.trim().is_empty() {
            return Err(SelectionError::EmptyQuery);
        }
        Ok(Self { mode, text })
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Sentence indices, nearest first.
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub sentences: Vec<Sentence>,
    pub k_requested: usize,
}

impl SelectionResult {
    /// Selected sentences re-ordered by their position in the document.
    pub fn in_document_order(&self) -> Vec<Sentence> {
        let mut s = self.sentences.clone();
        s.sort_by_key(|s| s.index);
        s
    }
}

/// Indices of the `k` smallest distances, ties going to the lower index.
pub fn top_k_nearest(distances: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    let cmp = |a: &usize, b: &usize| distances[*a].total_cmp(&distances[*b]).then(a.cmp(b));
    let k = k.min(order.len());
    if k == 0 {
        return Vec::new();
    }
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order
}

pub fn select_evidence(
    query: &SelectionQuery,
    sentences: &[Sentence],
    k: usize,
    embedder: &dyn Embedder,
    cache: &EmbeddingCache,
) -> Result<SelectionResult, SelectionError> {
    if k == 0 {
        return Err(SelectionError::ZeroK);
    }
    if sentences.is_empty() {
        return Ok(SelectionResult {
            indices: Vec::new(),
            distances: Vec::new(),
            sentences: Vec::new(),
            k_requested: k,
        });
    }
    let mut texts: Vec<&str> = Vec::with_capacity(sentences.len() + 1);
    texts.push(query.text());
    texts.extend(sentences.iter().map(|s| s.text.as_str()));
    let vectors = cached_embed(cache, embedder, &texts)?;
    let (q, rest) = vectors.split_first().expect("query vector present");
    let distances = rest
        .iter()
        .map(|v| euclidean_distance(q, v))
        .collect::<Result<Vec<_>, _>>()?;
    let indices = top_k_nearest(&distances, k);
    Ok(SelectionResult {
        distances: indices.iter().map(|&i| distances[i]).collect(),
        sentences: indices.iter().map(|&i| sentences[i].clone()).collect(),
        indices,
        k_requested: k,
    })
}
