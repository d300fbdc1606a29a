use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_match, EvalError};
use crate::datasets::QARecord;
use crate::embedding::{Embedder, EmbeddingCache};
use crate::llm::{
    build_prompt, construct_triples, generate_answer, LlmClient, MethodId, PromptInputs,
    PromptOptions, ResponseCache,
};
use crate::selection::{select_evidence, SelectionQuery, SelectionResult};
use crate::text::{count_tokens, split_sentences, truncate_tokens, TokenBudget};
use crate::triples::Triple;

/// Knobs for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodId,
    /// Evidence sentences kept per question.
    pub k: usize,
    pub max_tokens: TokenBudget,
    /// Dataset label used in reports.
    pub dataset: String,
    /// Records processed in parallel.
    pub concurrency: usize,
    pub prompt: PromptOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: MethodId::KsLlm,
            k: 2,
            max_tokens: TokenBudget::DEFAULT,
            dataset: "dataset".to_owned(),
            concurrency: 1,
            prompt: PromptOptions::default(),
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), EvalError> {
        if self.k == 0 {
            return Err(EvalError::Config("k must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(EvalError::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

/// Shared backends and caches for a run.
#[derive(Clone)]
pub struct Pipeline {
    pub client: Arc<dyn LlmClient>,
    pub embedder: Arc<dyn Embedder>,
    pub llm_cache: Arc<ResponseCache>,
    pub embedding_cache: Arc<EmbeddingCache>,
}

impl Pipeline {
    pub fn new(client: Arc<dyn LlmClient>, embedder: Arc<dyn Embedder>) -> Self {
        Self {
            client,
            embedder,
            llm_cache: Arc::new(ResponseCache::in_memory()),
            embedding_cache: Arc::new(EmbeddingCache::in_memory()),
        }
    }

    pub fn with_caches(mut self, llm: Arc<ResponseCache>, embeddings: Arc<EmbeddingCache>) -> Self {
        self.llm_cache = llm;
        self.embedding_cache = embeddings;
        self
    }
}

/// Result for one record; also the JSONL per-record schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordOutcome {
    pub id: String,
    pub method: MethodId,
    pub prediction: String,
    pub em: u8,
    pub selected_indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub triple_count: usize,
    pub timings_ms: BTreeMap<String, f64>,
    pub failed: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: MethodId,
    pub dataset: String,
    pub model: String,
    /// Set for methods that select evidence sentences.
    pub k: Option<usize>,
    /// Set for methods that insert a truncated document.
    pub max_tokens: Option<TokenBudget>,
    pub n: usize,
    pub n_failed: usize,
    /// Mean exact match over non-failed records, in `[0, 1]`.
    pub em: f64,
    pub wall_time: Duration,
    pub per_record: Vec<RecordOutcome>,
}

impl RunReport {
    pub fn em_percent(&self) -> String {
        format!("{:.2}", self.em * 100.0)
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

struct Trace {
    timings: BTreeMap<String, f64>,
    diagnostics: Vec<String>,
    selection: Option<SelectionResult>,
    triple_count: usize,
}

impl Trace {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(stage.to_owned(), ms(start.elapsed()));
        out
    }
}

fn triples_for(question: &str, pipeline: &Pipeline, trace: &mut Trace) -> Result<Vec<Triple>, String> {
    let parsed = trace
        .time("triples", || {
            construct_triples(question, pipeline.client.as_ref(), &pipeline.llm_cache)
        })
        .map_err(|e| format!("triple construction failed: {e}"))?;
    if parsed.malformed > 0 {
        trace.diagnostics.push(format!("malformed_triples={}", parsed.malformed));
    }
    if parsed.triples.is_empty() {
        trace.diagnostics.push("no_triples_parsed".into());
    }
    trace.triple_count = parsed.triples.len();
    Ok(parsed.triples)
}

fn select(
    query: SelectionQuery,
    document: &str,
    k: usize,
    pipeline: &Pipeline,
    trace: &mut Trace,
) -> Result<SelectionResult, String> {
    let sentences = split_sentences(document);
    trace.diagnostics.push(format!("document_sentences={}", sentences.len()));
    let result = trace
        .time("selection", || {
            select_evidence(
                &query,
                &sentences,
                k,
                pipeline.embedder.as_ref(),
                &pipeline.embedding_cache,
            )
        })
        .map_err(|e| format!("evidence selection failed: {e}"))?;
    trace.selection = Some(result.clone());
    Ok(result)
}

fn run_record(
    record: &QARecord,
    config: &RunConfig,
    pipeline: &Pipeline,
    trace: &mut Trace,
) -> Result<String, String> {
    let method = config.method;
    let document = if method.needs_document() {
        Some(record.evidence.as_deref().ok_or("missing evidence document")?)
    } else {
        None
    };
    let triples = if method.needs_triples() {
        Some(triples_for(&record.question, pipeline, trace)?)
    } else {
        None
    };
    let selection = if method.selects_sentences() {
        let doc = document.expect("selection methods need a document");
        let query = match (method, &triples) {
            (MethodId::KsQ, _) => SelectionQuery::from_question(&record.question),
            (_, Some(t)) if !t.is_empty() => SelectionQuery::from_triples(t),
            _ => {
                trace.diagnostics.push("selection_query=question_fallback".into());
                SelectionQuery::from_question(&record.question)
            }
        }
        .map_err(|e| e.to_string())?;
        Some(select(query, doc, config.k, pipeline, trace)?)
    } else {
        None
    };
    let sentences = selection.as_ref().map(|s| s.sentences.clone());
    let prompt_document = match method {
        MethodId::StandardDoc | MethodId::CotDoc => {
            let doc = document.expect("document methods have a document");
            trace.diagnostics.push(format!(
                "document_tokens={}",
                count_tokens(truncate_tokens(doc, config.max_tokens))
            ));
            Some(doc)
        }
        _ => None,
    };
    let inputs = PromptInputs {
        question: &record.question,
        document: prompt_document,
        triples: triples.as_deref(),
        sentences: sentences.as_deref(),
    };
    let prompt = build_prompt(method, &inputs, config.max_tokens, &config.prompt)
        .map_err(|e| e.to_string())?;
    trace
        .time("answer", || generate_answer(&prompt, pipeline.client.as_ref(), &pipeline.llm_cache))
        .map_err(|e| format!("answer generation failed: {e}"))
}

/// Runs one method on one record. Record-level failures are captured in the
/// outcome rather than returned.
pub fn process_record(record: &QARecord, config: &RunConfig, pipeline: &Pipeline) -> RecordOutcome {
    let start = Instant::now();
    let mut trace = Trace {
        timings: BTreeMap::new(),
        diagnostics: Vec::new(),
        selection: None,
        triple_count: 0,
    };
    let result = run_record(record, config, pipeline, &mut trace);
    trace.timings.insert("total".into(), ms(start.elapsed()));
    let (prediction, em, failed) = match result {
        Ok(p) => {
            let em = u8::from(exact_match(&p, &record.answers));
            (p, em, false)
        }
        Err(e) => {
            trace.diagnostics.push(format!("error: {e}"));
            (String::new(), 0, true)
        }
    };
    let (selected_indices, distances) = trace
        .selection
        .map(|s| (s.indices, s.distances))
        .unwrap_or_default();
    RecordOutcome {
        id: record.id.clone(),
        method: config.method,
        prediction,
        em,
        selected_indices,
        distances,
        triple_count: trace.triple_count,
        timings_ms: trace.timings,
        failed,
        diagnostics: trace.diagnostics,
    }
}

pub fn run_method(
    config: &RunConfig,
    records: &[QARecord],
    pipeline: &Pipeline,
) -> Result<RunReport, EvalError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.concurrency)
        .build()
        .map_err(|e| EvalError::Config(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let per_record: Vec<RecordOutcome> = pool.install(|| {
        records
            .par_iter()
            .map(|r| process_record(r, config, pipeline))
            .collect()
    });
    let wall_time = start.elapsed();
    let n_failed = per_record.iter().filter(|o| o.failed).count();
    let scored = per_record.len() - n_failed;
    let hits: usize = per_record
        .iter()
        .filter(|o| !o.failed)
        .map(|o| usize::from(o.em))
        .sum();
    let em = if scored == 0 { 0.0 } else { hits as f64 / scored as f64 };
    let method = config.method;
    Ok(RunReport {
        method,
        dataset: config.dataset.clone(),
        model: pipeline.client.model().to_owned(),
        k: method.selects_sentences().then_some(config.k),
        max_tokens: matches!(method, MethodId::StandardDoc | MethodId::CotDoc)
            .then_some(config.max_tokens),
        n: per_record.len(),
        n_failed,
        em,
        wall_time,
        per_record,
    })
}

/// One KS-LLM run per `k`, sharing the pipeline's caches so triples and
/// sentence embeddings are computed once.
pub fn sweep_k(
    config: &RunConfig,
    ks: &[usize],
    records: &[QARecord],
    pipeline: &Pipeline,
) -> Result<Vec<RunReport>, EvalError> {
    if ks.is_empty() {
        return Err(EvalError::Config("k sweep needs at least one k".into()));
    }
    ks.iter()
        .map(|&k| {
            let cfg = RunConfig {
                method: MethodId::KsLlm,
                k,
                ..config.clone()
            };
            run_method(&cfg, records, pipeline)
        })
        .collect()
}

/// One run per document budget for a document-bearing baseline
/// (`standard_doc` or `cot_doc`).
pub fn sweep_length(
    config: &RunConfig,
    budgets: &[TokenBudget],
    records: &[QARecord],
    pipeline: &Pipeline,
) -> Result<Vec<RunReport>, EvalError> {
    if budgets.is_empty() {
        return Err(EvalError::Config("length sweep needs at least one budget".into()));
    }
    if !matches!(config.method, MethodId::StandardDoc | MethodId::CotDoc) {
        return Err(EvalError::Config(format!(
            "length sweep applies to standard_doc or cot_doc, not {}",
            config.method
        )));
    }
    budgets
        .iter()
        .map(|&b| {
            let cfg = RunConfig {
                max_tokens: b,
                ..config.clone()
            };
            run_method(&cfg, records, pipeline)
        })
        .collect()
}
