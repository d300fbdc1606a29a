//! TOML run configuration with dotted-key overrides.
//!
//! ```toml
//! method = "ks_llm"
//! concurrency = 4
//!
//! [llm]
//! kind = "remote"            # or "mock" with mock_script = "script.json"
//! base_url = "http://localhost:8000/v1"
//! model = "vicuna-13b-v1.5"
//! api_key_env = "LLM_API_KEY"
//!
//! [embedder]
//! kind = "hash"              # or "remote" with endpoint_url / model
//! dim = 256
//!
//! [selection]
//! k = 2
//!
//! [truncation]
//! max_tokens = 300
//!
//! [dataset]
//! path = "data/triviaqa-verified.jsonl"
//!
//! [cache]
//! dir = ".ksllm-cache"
//!
//! [output]
//! path = "out"
//! ```
//!
//! Relative paths are resolved against the config file's directory. Secrets
//! are never read from the file; `api_key_env` names the environment
//! variable that holds them.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datasets::{load_jsonl, LoadMode, Loaded};
use crate::embedding::{Embedder, EmbedderConfig, EmbedderKind, EmbeddingCache};
use crate::evaluation::{Pipeline, ReportFormat, RunConfig};
use crate::llm::{
    ChatClient, LlmClient, MethodId, MockScript, PromptOptions, ResponseCache, ScriptedMockClient,
    ANSWER_FORMAT_INSTRUCTION,
};
use crate::retry::RetryPolicy;
use crate::text::TokenBudget;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid override {0:?}: expected key=value")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default = "default_method")]
    pub method: MethodId,
    #[serde(default = "one")]
    pub concurrency: usize,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub embedder: EmbedderSettings,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub truncation: TruncationSettings,
    #[serde(default)]
    pub dataset: DatasetSettings,
    #[serde(default)]
    pub cache: CacheSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

fn default_method() -> MethodId {
    MethodId::KsLlm
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Remote,
    Mock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmSettings {
    pub kind: LlmKind,
    pub base_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub format_instruction: String,
    pub mock_script: Option<PathBuf>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            kind: LlmKind::Remote,
            base_url: String::new(),
            model: String::new(),
            api_key_env: None,
            timeout_secs: 120,
            max_in_flight: 4,
            format_instruction: ANSWER_FORMAT_INSTRUCTION.to_owned(),
            mock_script: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKindName {
    Hash,
    Remote,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderSettings {
    pub kind: EmbedderKindName,
    pub dim: usize,
    pub endpoint_url: String,
    pub model: String,
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
    pub max_batch: usize,
}

impl Default for EmbedderSettings {
    fn default() -> Self {
        Self {
            kind: EmbedderKindName::Hash,
            dim: 256,
            endpoint_url: String::new(),
            model: String::new(),
            api_key_env: None,
            timeout_secs: 60,
            max_batch: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSettings {
    pub k: usize,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self { k: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSettings {
    pub max_tokens: usize,
}

impl Default for TruncationSettings {
    fn default() -> Self {
        Self { max_tokens: 300 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSettings {
    pub path: Option<PathBuf>,
    /// Report label; defaults to the file stem of `path`.
    pub name: Option<String>,
    pub lenient: bool,
    /// Generate evidence for records without one before running.
    pub generate_evidence: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheSettings {
    /// No on-disk caching when unset.
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSettings {
    /// Directory receiving report files.
    pub path: PathBuf,
    pub format: String,
    pub redact_timings: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            path: PathBuf::from("out"),
            format: "csv".into(),
            redact_timings: false,
        }
    }
}

/// Parses an override value as a TOML scalar or array, falling back to a bare
/// string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_owned())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_owned(), value);
    Ok(())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl Settings {
    /// Loads `path` (or defaults when `None`) and applies `key=value`
    /// overrides; overrides win over file values.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                toml::from_str::<toml::Table>(&text).map_err(|e| ConfigError::Read {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .filter(|(k, _)| !k.trim().is_empty())
                .ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_dotted(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let mut settings: Settings = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))?;
        let base = path
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        resolve(&base, &mut settings.dataset.path);
        resolve(&base, &mut settings.cache.dir);
        resolve(&base, &mut settings.llm.mock_script);
        if settings.output.path.is_relative() {
            settings.output.path = base.join(&settings.output.path);
        }
        settings.validate()?;
        Ok(settings)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.selection.k == 0 {
            return Err(ConfigError::Invalid("selection.k must be at least 1".into()));
        }
        if self.truncation.max_tokens == 0 {
            return Err(ConfigError::Invalid("truncation.max_tokens must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(ConfigError::Invalid("concurrency must be at least 1".into()));
        }
        self.report_format()?;
        Ok(())
    }

    pub fn report_format(&self) -> Result<ReportFormat, ConfigError> {
        self.output.format.parse().map_err(ConfigError::Invalid)
    }

    /// The effective configuration as TOML.
    pub fn effective(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.name.clone().unwrap_or_else(|| {
            self.dataset
                .path
                .as_deref()
                .and_then(Path::file_stem)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            method: self.method,
            k: self.selection.k,
            max_tokens: TokenBudget::new(self.truncation.max_tokens).expect("validated"),
            dataset: self.dataset_name(),
            concurrency: self.concurrency,
            prompt: PromptOptions {
                format_instruction: self.llm.format_instruction.clone(),
            },
        }
    }

    pub fn embedder_config(&self) -> EmbedderConfig {
        let e = &self.embedder;
        let kind = match e.kind {
            EmbedderKindName::Hash => EmbedderKind::Hash { dim: e.dim },
            EmbedderKindName::Remote => EmbedderKind::Remote {
                endpoint_url: e.endpoint_url.clone(),
                model_name: e.model.clone(),
                api_key_env: e.api_key_env.clone(),
            },
        };
        EmbedderConfig {
            kind,
            timeout: Duration::from_secs(e.timeout_secs),
            max_batch: e.max_batch,
            retry: RetryPolicy::default(),
        }
    }

    pub fn build_embedder(&self) -> Result<Arc<dyn Embedder>, ConfigError> {
        self.embedder_config()
            .build()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_client(&self) -> Result<Arc<dyn LlmClient>, ConfigError> {
        let l = &self.llm;
        match l.kind {
            LlmKind::Mock => {
                let script = match &l.mock_script {
                    Some(p) => MockScript::load(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
                    None => MockScript::default(),
                };
                Ok(Arc::new(ScriptedMockClient::new(script)))
            }
            LlmKind::Remote => ChatClient::new(
                &l.base_url,
                &l.model,
                l.api_key_env.as_deref(),
                Duration::from_secs(l.timeout_secs),
                l.max_in_flight,
                RetryPolicy::default(),
            )
            .map(|c| Arc::new(c) as Arc<dyn LlmClient>)
            .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    pub fn build_pipeline(&self) -> Result<Pipeline, ConfigError> {
        let pipeline = Pipeline::new(self.build_client()?, self.build_embedder()?);
        Ok(match &self.cache.dir {
            Some(dir) => pipeline.with_caches(
                Arc::new(ResponseCache::on_disk(dir)),
                Arc::new(EmbeddingCache::on_disk(dir)),
            ),
            None => pipeline,
        })
    }

    pub fn load_dataset(&self) -> Result<Loaded, ConfigError> {
        let path = self
            .dataset
            .path
            .as_deref()
            .ok_or_else(|| ConfigError::Invalid("dataset.path is not set".into()))?;
        let mode = if self.dataset.lenient {
            LoadMode::Lenient
        } else {
            LoadMode::Strict
        };
        load_jsonl(path, mode).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
