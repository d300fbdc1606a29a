use std::collections::BTreeMap;

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::store::digest;

/// Embedder backed by a fixed text-to-vector table. Unknown texts are an error.
#[derive(Debug, Clone)]
pub struct LookupEmbedder {
    table: BTreeMap<String, EmbeddingVector>,
    identity: String,
}

impl LookupEmbedder {
    pub fn new<I, S>(entries: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = BTreeMap::new();
        let mut dim = None;
        for (text, values) in entries {
            let v = EmbeddingVector::new(values)?;
            match dim {
                None => dim = Some(v.dim()),
                Some(d) if d != v.dim() => {
                    return Err(EmbedError::DimensionMismatch { left: d, right: v.dim() })
                }
                _ => {}
            }
            table.insert(text.into(), v);
        }
        let fingerprint = serde_json::to_string(&table).expect("vectors serialize");
        Ok(Self {
            identity: format!("lookup:{}", &digest(&[&fingerprint])[..16]),
            table,
        })
    }
}

impl Embedder for LookupEmbedder {
    fn identity(&self) -> String {
        self.identity.clone()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                self.table
                    .get(*t)
                    .cloned()
                    .ok_or_else(|| EmbedError::Input(format!("no lookup entry for {t:?}")))
            })
            .collect()
    }
}
