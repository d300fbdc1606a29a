use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{embed, EmbedError, Embedder, EmbeddingVector};
use crate::store::{digest, CacheCounts, CacheStats, JsonStore, Lookup};

#[derive(Serialize, Deserialize)]
struct Entry {
    dim: usize,
    values: EmbeddingVector,
    embedder: String,
}

/// Embedding cache keyed by `(embedder identity, text)`: an in-process map in
/// front of an optional on-disk store under `<dir>/emb/`.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    memory: RwLock<HashMap<String, EmbeddingVector>>,
    disk: Option<JsonStore>,
    stats: CacheStats,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl AsRef<Path>) -> Self {
        Self {
            disk: Some(JsonStore::new(dir, "emb")),
            ..Self::default()
        }
    }

    pub fn stats(&self) -> CacheCounts {
        self.stats.snapshot()
    }

    pub fn store(&self) -> Option<&JsonStore> {
        self.disk.as_ref()
    }

    fn key(identity: &str, text: &str) -> String {
        digest(&[identity, text])
    }

    fn lookup(&self, identity: &str, key: &str) -> Option<EmbeddingVector> {
        if let Some(v) = self.memory.read().unwrap().get(key) {
            return Some(v.clone());
        }
        let disk = self.disk.as_ref()?;
        match disk.get::<Entry>(key) {
            Lookup::Found(e) if e.embedder == identity && e.dim == e.values.dim() => {
                self.memory.write().unwrap().insert(key.to_owned(), e.values.clone());
                Some(e.values)
            }
            Lookup::Missing => None,
            Lookup::Found(_) => {
                log::warn!("embedding cache entry {key} does not match its key; recomputing");
                self.stats.corrupt();
                disk.remove(key);
                None
            }
            Lookup::Corrupt(reason) => {
                log::warn!("unreadable embedding cache entry {key}: {reason}; recomputing");
                self.stats.corrupt();
                disk.remove(key);
                None
            }
        }
    }

    fn insert(&self, identity: &str, key: &str, v: &EmbeddingVector) {
        self.memory.write().unwrap().insert(key.to_owned(), v.clone());
        if let Some(disk) = &self.disk {
            let entry = Entry {
                dim: v.dim(),
                values: v.clone(),
                embedder: identity.to_owned(),
            };
            if let Err(e) = disk.put(key, &entry) {
                log::warn!("failed to write embedding cache entry {key}: {e}");
            }
        }
    }
}

/// Like [`embed`], but serves vectors from `cache` when present and stores
/// newly computed ones. Repeated texts in one call are embedded once.
pub fn cached_embed(
    cache: &EmbeddingCache,
    embedder: &dyn Embedder,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    if texts.is_empty() {
        return Err(EmbedError::Input("no texts to embed".into()));
    }
    let identity = embedder.identity();
    let keys: Vec<String> = texts.iter().map(|t| EmbeddingCache::key(&identity, t)).collect();
    let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
    let mut pending: Vec<usize> = Vec::new();
    let mut pending_keys: HashMap<&str, usize> = HashMap::new();
    for (i, key) in keys.iter().enumerate() {
        match cache.lookup(&identity, key) {
            Some(v) => {
                cache.stats.hit();
                out.push(Some(v));
            }
            None => {
                out.push(None);
                if !pending_keys.contains_key(key.as_str()) {
                    cache.stats.miss();
                    pending_keys.insert(key, pending.len());
                    pending.push(i);
                }
            }
        }
    }
    if !pending.is_empty() {
        let miss_texts: Vec<&str> = pending.iter().map(|&i| texts[i]).collect();
        let computed = embed(embedder, &miss_texts)?;
        for (&i, v) in pending.iter().zip(&computed) {
            cache.insert(&identity, &keys[i], v);
        }
        for (i, slot) in out.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = Some(computed[pending_keys[keys[i].as_str()]].clone());
            }
        }
    }
    Ok(out.into_iter().map(|v| v.expect("filled")).collect())
}
