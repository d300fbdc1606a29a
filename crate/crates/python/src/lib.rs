//! Python bindings: text processing, triples, hash embeddings, selection and
//! prompt construction. Model calls stay on the Rust side.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ksllm::embedding::{self, EmbeddingCache, HashEmbedder};
use ksllm::llm::{PromptInputs, PromptOptions};
use ksllm::selection::{QueryMode, SelectionQuery};
use ksllm::text::{self, TokenBudget};
use ksllm::triples::{self as core_triples, RenderStyle};
use ksllm::{EmbeddingVector, MethodId};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn budget(max_tokens: usize) -> PyResult<TokenBudget> {
    TokenBudget::new(max_tokens).map_err(value_error)
}

#[pyclass(frozen, eq, from_py_object, module = "ksllm_py")]
#[derive(Clone, PartialEq)]
struct Triple(core_triples::Triple);

#[pymethods]
impl Triple {
    #[new]
    fn new(head: &str, relation: &str, tail: &str) -> PyResult<Self> {
        core_triples::Triple::new(head, relation, tail).map(Triple).map_err(value_error)
    }

    #[getter]
    fn head(&self) -> &str {
        self.0.head()
    }

    #[getter]
    fn relation(&self) -> &str {
        self.0.relation()
    }

    #[getter]
    fn tail(&self) -> &str {
        self.0.tail()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Triple{}", self.0)
    }
}

#[pyclass(frozen, eq, from_py_object, module = "ksllm_py")]
#[derive(Clone, PartialEq)]
struct Sentence(text::Sentence);

#[pymethods]
impl Sentence {
    #[getter]
    fn index(&self) -> usize {
        self.0.index
    }

    #[getter]
    fn text(&self) -> &str {
        &self.0.text
    }

    /// Byte offsets into the UTF-8 document.
    #[getter]
    fn span(&self) -> (usize, usize) {
        self.0.span
    }

    fn __repr__(&self) -> String {
        format!("Sentence({}, {:?})", self.0.index, self.0.text)
    }
}

#[pyfunction]
fn split_sentences(document: &str) -> Vec<Sentence> {
    text::split_sentences(document).into_iter().map(Sentence).collect()
}

#[pyfunction]
fn count_tokens(text: &str) -> usize {
    text::count_tokens(text)
}

#[pyfunction]
fn truncate_tokens(text: &str, max_tokens: usize) -> PyResult<String> {
    Ok(text::truncate_tokens(text, budget(max_tokens)?).to_owned())
}

#[pyfunction]
fn normalize_answer(text: &str) -> String {
    text::normalize_answer(text)
}

#[pyfunction]
fn exact_match(prediction: &str, answers: Vec<String>) -> bool {
    ksllm::exact_match(prediction, &answers)
}

/// Returns `(triples, malformed_count)`.
#[pyfunction]
fn parse_triples(text: &str) -> (Vec<Triple>, usize) {
    let parsed = core_triples::parse_triples(text);
    (parsed.triples.into_iter().map(Triple).collect(), parsed.malformed)
}

/// `style` is "query" (comma-joined) or "prompt" (one per line).
#[pyfunction]
#[pyo3(signature = (triples, style = "prompt"))]
fn render_triples(triples: Vec<Triple>, style: &str) -> PyResult<String> {
    let style = match style {
        "query" => RenderStyle::Query,
        "prompt" => RenderStyle::Prompt,
        other => return Err(value_error(format!("unknown style {other:?}"))),
    };
    let ts: Vec<_> = triples.into_iter().map(|t| t.0).collect();
    Ok(core_triples::render_triples(&ts, style))
}

#[pyfunction]
#[pyo3(signature = (text, dim = 256))]
fn hash_embed(text: &str, dim: usize) -> PyResult<Vec<f64>> {
    embedding::hash_embed(text, dim)
        .map(|v| v.values().to_vec())
        .map_err(value_error)
}

#[pyfunction]
fn euclidean_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let a = EmbeddingVector::new(a).map_err(value_error)?;
    let b = EmbeddingVector::new(b).map_err(value_error)?;
    embedding::euclidean_distance(&a, &b).map_err(value_error)
}

/// Selects the `k` sentences of `document` nearest to `query` under the hash
/// embedder. Returns `(sentence, distance)` pairs, nearest first.
#[pyfunction]
#[pyo3(signature = (query, document, k, dim = 256))]
fn select_evidence(query: &str, document: &str, k: usize, dim: usize) -> PyResult<Vec<(Sentence, f64)>> {
    let embedder = HashEmbedder::new(dim).map_err(value_error)?;
    let query = SelectionQuery::new(QueryMode::Triples, query.to_owned()).map_err(value_error)?;
    let sentences = text::split_sentences(document);
    let result = ksllm::select_evidence(&query, &sentences, k, &embedder, &EmbeddingCache::in_memory())
        .map_err(value_error)?;
    Ok(result
        .sentences
        .into_iter()
        .map(Sentence)
        .zip(result.distances)
        .collect())
}

/// Builds the answer prompt for `method` and returns its user message.
#[pyfunction]
#[pyo3(signature = (method, question, document = None, triples = None, sentences = None, max_tokens = 300))]
fn build_prompt(
    method: &str,
    question: &str,
    document: Option<&str>,
    triples: Option<Vec<Triple>>,
    sentences: Option<Vec<Sentence>>,
    max_tokens: usize,
) -> PyResult<String> {
    let method: MethodId = method.parse().map_err(value_error)?;
    let triples: Option<Vec<_>> = triples.map(|v| v.into_iter().map(|t| t.0).collect());
    let sentences: Option<Vec<_>> = sentences.map(|v| v.into_iter().map(|s| s.0).collect());
    let inputs = PromptInputs {
        question,
        document,
        triples: triples.as_deref(),
        sentences: sentences.as_deref(),
    };
    let prompt = ksllm::llm::build_prompt(method, &inputs, budget(max_tokens)?, &PromptOptions::default())
        .map_err(value_error)?;
    Ok(prompt.user_content().to_owned())
}

#[pymodule]
fn ksllm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Triple>()?;
    m.add_class::<Sentence>()?;
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(count_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(truncate_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(parse_triples, m)?)?;
    m.add_function(wrap_pyfunction!(render_triples, m)?)?;
    m.add_function(wrap_pyfunction!(hash_embed, m)?)?;
    m.add_function(wrap_pyfunction!(euclidean_distance, m)?)?;
    m.add_function(wrap_pyfunction!(select_evidence, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    Ok(())
}
