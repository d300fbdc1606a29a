use std::collections::HashMap;
use std::path::Path;
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::{GenParams, Prompt};
use crate::store::{digest, CacheCounts, CacheStats, JsonStore, Lookup};

#[derive(Serialize, Deserialize)]
struct Entry {
    prompt_digest: String,
    model: String,
    params: GenParams,
    response: String,
}

/// Digest of the prompt bytes that reach the model: messages and parameters.
pub(crate) fn prompt_digest(prompt: &Prompt) -> String {
    let messages = serde_json::to_string(&prompt.messages).expect("messages serialize");
    let params = serde_json::to_string(&prompt.params).expect("params serialize");
    digest(&[&messages, &params])
}

/// LLM response cache keyed by `(model, prompt digest)`, with an optional
/// on-disk store under `<dir>/llm/`.
#[derive(Debug, Default)]
pub struct ResponseCache {
    memory: RwLock<HashMap<String, String>>,
    disk: Option<JsonStore>,
    stats: CacheStats,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl AsRef<Path>) -> Self {
        Self {
            disk: Some(JsonStore::new(dir, "llm")),
            ..Self::default()
        }
    }

    pub fn stats(&self) -> CacheCounts {
        self.stats.snapshot()
    }

    pub fn store(&self) -> Option<&JsonStore> {
        self.disk.as_ref()
    }

    pub fn get(&self, model: &str, prompt: &Prompt) -> Option<String> {
        let pd = prompt_digest(prompt);
        let key = digest(&[model, &pd]);
        if let Some(r) = self.memory.read().unwrap().get(&key) {
            self.stats.hit();
            return Some(r.clone());
        }
        let found = self.disk.as_ref().and_then(|disk| match disk.get::<Entry>(&key) {
            Lookup::Found(e) if e.model == model && e.prompt_digest == pd => Some(e.response),
            Lookup::Missing => None,
            _ => {
                log::warn!("discarding unreadable LLM cache entry {key}");
                self.stats.corrupt();
                disk.remove(&key);
                None
            }
        });
        match &found {
            Some(r) => {
                self.stats.hit();
                self.memory.write().unwrap().insert(key, r.clone());
            }
            None => self.stats.miss(),
        }
        found
    }

    pub fn put(&self, model: &str, prompt: &Prompt, response: &str) {
        let pd = prompt_digest(prompt);
        let key = digest(&[model, &pd]);
        self.memory.write().unwrap().insert(key.clone(), response.to_owned());
        if let Some(disk) = &self.disk {
            let entry = Entry {
                prompt_digest: pd,
                model: model.to_owned(),
                params: prompt.params,
                response: response.to_owned(),
            };
            if let Err(e) = disk.put(&key, &entry) {
                log::warn!("failed to write LLM cache entry {key}: {e}");
            }
        }
    }
}
