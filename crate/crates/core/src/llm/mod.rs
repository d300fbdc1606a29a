//! LLM client contract, prompt templates for every method, a scripted mock
//! client, an HTTP chat client, and a content-addressed response cache.

mod cache;
mod mock;
mod prompts;
mod remote;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::ResponseCache;
pub use mock::{MockRule, MockScript, ScriptedMockClient};
pub use prompts::{
    build_prompt, evidence_prompt, triple_prompt, PromptError, PromptInputs, PromptOptions,
    ANSWER_FORMAT_INSTRUCTION, COT_TRIGGER,
};
pub use remote::ChatClient;

use crate::triples::{parse_triples, ParsedTriples};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("LLM service unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("LLM protocol error: {0}")]
    Protocol(String),
    #[error("mock client has no scripted response for prompt: {0}")]
    MockMiss(String),
    #[error("invalid LLM input: {0}")]
    Input(String),
}

/// The seven question-answering methods: six baselines and the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Standard,
    StandardDoc,
    CotDoc,
    KsQ,
    KsT,
    KsS,
    KsLlm,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::Standard,
        MethodId::StandardDoc,
        MethodId::CotDoc,
        MethodId::KsQ,
        MethodId::KsT,
        MethodId::KsS,
        MethodId::KsLlm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::Standard => "standard",
            MethodId::StandardDoc => "standard_doc",
            MethodId::CotDoc => "cot_doc",
            MethodId::KsQ => "ks_q",
            MethodId::KsT => "ks_t",
            MethodId::KsS => "ks_s",
            MethodId::KsLlm => "ks_llm",
        }
    }

    /// Human-readable name used in markdown tables.
    pub fn label(self) -> &'static str {
        match self {
            MethodId::Standard => "Standard",
            MethodId::StandardDoc => "Standard+doc",
            MethodId::CotDoc => "CoT+doc",
            MethodId::KsQ => "KS-Q",
            MethodId::KsT => "KS-T",
            MethodId::KsS => "KS-S",
            MethodId::KsLlm => "KS-LLM",
        }
    }

    pub fn needs_document(self) -> bool {
        !matches!(self, MethodId::Standard | MethodId::KsT)
    }

    pub fn needs_triples(self) -> bool {
        matches!(self, MethodId::KsT | MethodId::KsS | MethodId::KsLlm)
    }

    pub fn selects_sentences(self) -> bool {
        matches!(self, MethodId::KsQ | MethodId::KsS | MethodId::KsLlm)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}"))
    }
}

/// What a prompt is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    ConstructTriples,
    GenerateEvidence,
    Answer(MethodId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub task: Task,
    pub messages: Vec<Message>,
    pub params: GenParams,
}

impl Prompt {
    pub fn new(task: Task, messages: Vec<Message>, params: GenParams) -> Result<Self, LlmError> {
        if !messages.iter().any(|m| m.role == Role::User) {
            return Err(LlmError::Input("prompt has no user message".into()));
        }
        if messages.iter().any(|m| m.content.trim().is_empty()) {
            return Err(LlmError::Input("prompt has an empty message".into()));
        }
        if params.temperature.is_nan() || params.temperature < 0.0 {
            return Err(LlmError::Input("temperature must be non-negative".into()));
        }
        Ok(Self {
            task,
            messages,
            params,
        })
    }

    /// All message contents joined by newlines.
    pub fn content(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// A chat-completion backend. Implementations must be safe to share across
/// worker threads.
pub trait LlmClient: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, prompt: &Prompt) -> Result<String, LlmError>;
}

/// Sends `prompt` unless `cache` already holds the response.
pub fn complete_cached(
    prompt: &Prompt,
    client: &dyn LlmClient,
    cache: &ResponseCache,
) -> Result<String, LlmError> {
    if let Some(hit) = cache.get(client.model(), prompt) {
        return Ok(hit);
    }
    let response = client.complete(prompt)?;
    cache.put(client.model(), prompt, &response);
    Ok(response)
}

/// Asks the model for triples about the question's subject entity and
/// parses them. An unparseable response yields an empty set, not an error.
pub fn construct_triples(
    question: &str,
    client: &dyn LlmClient,
    cache: &ResponseCache,
) -> Result<ParsedTriples, LlmError> {
    let prompt = triple_prompt(question)?;
    let response = complete_cached(&prompt, client, cache)?;
    Ok(parse_triples(&response))
}

const ANSWER_LABELS: &[&str] = &["answer:", "the answer is:", "the answer is"];

fn strip_label(text: &str) -> &str {
    let text = text.trim();
    for label in ANSWER_LABELS {
        if text.len() >= label.len()
            && text.is_char_boundary(label.len())
            && text[..label.len()].eq_ignore_ascii_case(label)
        {
            return text[label.len()..].trim();
        }
    }
    text
}

/// Trims the completion and removes a leading answer label. Chain-of-thought
/// completions are first reduced to their last `Answer:` line, if any.
pub fn postprocess_answer(task: Task, completion: &str) -> String {
    let mut text = completion.trim();
    if task == Task::Answer(MethodId::CotDoc) {
        if let Some(line) = text
            .lines()
            .rev()
            .find(|l| l.trim_start().to_ascii_lowercase().starts_with("answer:"))
        {
            text = line;
        }
    }
    strip_label(text).to_owned()
}

pub fn generate_answer(
    prompt: &Prompt,
    client: &dyn LlmClient,
    cache: &ResponseCache,
) -> Result<String, LlmError> {
    let response = complete_cached(prompt, client, cache)?;
    Ok(postprocess_answer(prompt.task, &response))
}
