use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LlmClient, LlmError, Message, Prompt};
use crate::http::{self, Gate, HttpFailure};
use crate::retry::RetryPolicy;

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct ChatClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    bearer: Option<String>,
    retry: RetryPolicy,
    gate: Gate,
}

impl ChatClient {
    /// `base_url` may be the API root (`.../v1`) or the full
    /// `.../chat/completions` URL.
    pub fn new(
        base_url: &str,
        model: &str,
        api_key_env: Option<&str>,
        timeout: Duration,
        max_in_flight: usize,
        retry: RetryPolicy,
    ) -> Result<Self, LlmError> {
        if base_url.is_empty() || model.is_empty() {
            return Err(LlmError::Input("LLM client needs base_url and model".into()));
        }
        let trimmed = base_url.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_owned()
        } else {
            format!("{trimmed}/chat/completions")
        };
        Ok(Self {
            agent: http::agent(timeout),
            url,
            model: model.to_owned(),
            bearer: http::bearer_from_env(api_key_env).map_err(LlmError::Input)?,
            retry,
            gate: Gate::new(max_in_flight),
        })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl LlmClient for ChatClient {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, LlmError> {
        let body = ChatRequest {
            model: &self.model,
            messages: &prompt.messages,
            temperature: prompt.params.temperature,
            max_tokens: prompt.params.max_output_tokens,
        };
        let _permit = self.gate.acquire();
        let resp: ChatResponse =
            http::post_json(&self.agent, &self.url, self.bearer.as_deref(), &body, &self.retry)
                .map_err(|e| match e {
                    HttpFailure::Transport { attempts, message } => {
                        LlmError::Transport { attempts, message }
                    }
                    HttpFailure::Protocol(m) => LlmError::Protocol(m),
                })?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LlmError::Protocol("response has no choices[0].message.content".into()))
    }
}
