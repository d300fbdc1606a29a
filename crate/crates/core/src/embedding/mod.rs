//! Embedding vectors, the embedder contract and its backends, Euclidean
//! distance, and the persistent embedding cache.

mod cache;
mod hash;
mod lookup;
mod remote;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{cached_embed, EmbeddingCache};
pub use hash::{fnv1a64, hash_embed, HashEmbedder, MIN_HASH_DIM};
pub use lookup::LookupEmbedder;
pub use remote::RemoteEmbedder;

use crate::retry::RetryPolicy;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedding input: {0}")]
    Input(String),
    #[error("embedding service unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

impl EmbedError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, EmbedError::Transport { .. })
    }
}

/// A non-empty vector of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::Input("embedding has zero dimensions".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbedError::Input(format!("component {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        EmbeddingVector::new(values).map_err(serde::de::Error::custom)
    }
}

pub fn euclidean_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// A text embedding backend.
///
/// Implementations must be deterministic: the same text always maps to the
/// same vector for a given [`Embedder::identity`].
pub trait Embedder: Send + Sync {
    /// Stable description of the backend and every setting that affects its
    /// output. Used as part of cache keys.
    fn identity(&self) -> String;

    /// Embeds a non-empty batch of non-empty texts. Callers should go through
    /// [`embed`], which validates inputs and outputs.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;
}

/// Embeds `texts`, one vector per text in input order, with a shared dimension.
pub fn embed(embedder: &dyn Embedder, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::Input("no texts to embed".into()));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(EmbedError::Input(format!("text {i} is empty")));
    }
    let vectors = embedder.embed_batch(texts)?;
    if vectors.len() != texts.len() {
        return Err(EmbedError::Protocol(format!(
            "expected {} embeddings, got {}",
            texts.len(),
            vectors.len()
        )));
    }
    let dim = vectors[0].dim();
    if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(EmbedError::DimensionMismatch {
            left: dim,
            right: v.dim(),
        });
    }
    Ok(vectors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderKind {
    Hash {
        dim: usize,
    },
    Remote {
        endpoint_url: String,
        model_name: String,
        /// Environment variable holding a bearer token, if any.
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderConfig {
    pub kind: EmbedderKind,
    pub timeout: Duration,
    pub max_batch: usize,
    pub retry: RetryPolicy,
}

impl EmbedderConfig {
    pub fn hash(dim: usize) -> Self {
        Self {
            kind: EmbedderKind::Hash { dim },
            timeout: Duration::from_secs(60),
            max_batch: 64,
            retry: RetryPolicy::default(),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Embedder>, EmbedError> {
        if self.max_batch == 0 {
            return Err(EmbedError::Input("max_batch must be positive".into()));
        }
        Ok(match &self.kind {
            EmbedderKind::Hash { dim } => Arc::new(HashEmbedder::new(*dim)?),
            EmbedderKind::Remote {
                endpoint_url,
                model_name,
                api_key_env,
            } => Arc::new(RemoteEmbedder::new(
                endpoint_url,
                model_name,
                api_key_env.as_deref(),
                self.timeout,
                self.max_batch,
                self.retry,
            )?),
        })
    }
}

/// Wraps an embedder and counts backend calls and embedded texts.
pub struct CountingEmbedder<E: ?Sized> {
    calls: AtomicU64,
    texts: AtomicU64,
    inner: Arc<E>,
}

impl<E: Embedder + ?Sized> CountingEmbedder<E> {
    pub fn new(inner: Arc<E>) -> Self {
        Self {
            calls: AtomicU64::new(0),
            texts: AtomicU64::new(0),
            inner,
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn texts(&self) -> u64 {
        self.texts.load(Ordering::SeqCst)
    }
}

impl<E: Embedder + ?Sized> Embedder for CountingEmbedder<E> {
    fn identity(&self) -> String {
        self.inner.identity()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts.fetch_add(texts.len() as u64, Ordering::SeqCst);
        self.inner.embed_batch(texts)
    }
}
