use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LlmClient, LlmError, Prompt};

/// Responds with `response` when every string in `contains` occurs in the
/// prompt content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub contains: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default: Option<String>,
}

fn default_model() -> String {
    "mock".to_owned()
}

impl Default for MockScript {
    fn default() -> Self {
        Self {
            model: default_model(),
            rules: Vec::new(),
            default: None,
        }
    }
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Input(format!("{}: {e}", path.display())))
    }
}

/// Test double that answers from a script and records every prompt it sees.
#[derive(Debug)]
pub struct ScriptedMockClient {
    script: MockScript,
    calls: Mutex<Vec<Prompt>>,
}

impl ScriptedMockClient {
    pub fn new(script: MockScript) -> Self {
        Self {
            script,
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Script built from `(substring, response)` pairs, first match wins.
    pub fn from_pairs<I, A, B>(pairs: I, default: Option<&str>) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self::new(MockScript {
            rules: pairs
                .into_iter()
                .map(|(m, r)| MockRule {
                    contains: vec![m.into()],
                    response: r.into(),
                })
                .collect(),
            default: default.map(str::to_owned),
            ..MockScript::default()
        })
    }

    pub fn invocations(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn prompts(&self) -> Vec<Prompt> {
        self.calls.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        self.calls.lock().unwrap().clear();
    }
}

impl LlmClient for ScriptedMockClient {
    fn model(&self) -> &str {
        &self.script.model
    }

    fn complete(&self, prompt: &Prompt) -> Result<String, LlmError> {
        self.calls.lock().unwrap().push(prompt.clone());
        let content = prompt.content();
        self.script
            .rules
            .iter()
            .find(|r| r.contains.iter().all(|m| content.contains(m.as_str())))
            .map(|r| r.response.clone())
            .or_else(|| self.script.default.clone())
            .ok_or_else(|| {
                let head: String = prompt.user_content().chars().take(80).collect();
                LlmError::MockMiss(head)
            })
    }
}
