use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, EmbeddingVector};
use crate::http::{self, HttpFailure};
use crate::retry::RetryPolicy;

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

/// Client for an OpenAI-style `/embeddings` endpoint.
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    endpoint_url: String,
    model_name: String,
    bearer: Option<String>,
    max_batch: usize,
    retry: RetryPolicy,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint_url: &str,
        model_name: &str,
        api_key_env: Option<&str>,
        timeout: Duration,
        max_batch: usize,
        retry: RetryPolicy,
    ) -> Result<Self, EmbedError> {
        if endpoint_url.is_empty() || model_name.is_empty() {
            return Err(EmbedError::Input(
                "remote embedder needs endpoint_url and model_name".into(),
            ));
        }
        let bearer = http::bearer_from_env(api_key_env).map_err(EmbedError::Input)?;
        Ok(Self {
            agent: http::agent(timeout),
            endpoint_url: endpoint_url.to_owned(),
            model_name: model_name.to_owned(),
            bearer,
            max_batch: max_batch.max(1),
            retry,
        })
    }

    fn embed_chunk(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let body = EmbeddingRequest {
            model: &self.model_name,
            input: texts,
        };
        let resp: EmbeddingResponse =
            http::post_json(&self.agent, &self.endpoint_url, self.bearer.as_deref(), &body, &self.retry)
                .map_err(|e| match e {
                    HttpFailure::Transport { attempts, message } => {
                        EmbedError::Transport { attempts, message }
                    }
                    HttpFailure::Protocol(m) => EmbedError::Protocol(m),
                })?;
        if resp.data.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "sent {} inputs, received {} embeddings",
                texts.len(),
                resp.data.len()
            )));
        }
        let mut slots: Vec<Option<EmbeddingVector>> = vec![None; texts.len()];
        for item in resp.data {
            let slot = slots.get_mut(item.index).ok_or_else(|| {
                EmbedError::Protocol(format!("embedding index {} out of range", item.index))
            })?;
            if slot.is_some() {
                return Err(EmbedError::Protocol(format!("duplicate embedding index {}", item.index)));
            }
            *slot = Some(EmbeddingVector::new(item.embedding).map_err(|e| EmbedError::Protocol(e.to_string()))?);
        }
        Ok(slots.into_iter().map(|v| v.expect("every index filled")).collect())
    }
}

impl Embedder for RemoteEmbedder {
    fn identity(&self) -> String {
        format!("remote:{}:{}", self.endpoint_url, self.model_name)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.max_batch) {
            out.extend(self.embed_chunk(chunk)?);
        }
        Ok(out)
    }
}
