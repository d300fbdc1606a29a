//! Knowledge selection for question answering with large language models.
//!
//! A question is turned into knowledge triples by the model, the triples
//! select the nearest sentences of an evidence document in embedding space,
//! and triples plus sentences are given to the model to answer. The crate
//! also implements the six comparison baselines, exact-match evaluation,
//! and sweeps over the number of selected sentences and the evidence length.

pub mod config;
pub mod datasets;
pub mod embedding;
pub mod evaluation;
mod http;
pub mod llm;
pub mod retry;
pub mod selection;
pub mod store;
pub mod text;
pub mod triples;

pub use datasets::{QARecord, EvidenceSource};
pub use embedding::{EmbeddingVector, Embedder};
pub use evaluation::{exact_match, RunConfig, RunReport};
pub use llm::{LlmClient, MethodId, Prompt};
pub use selection::{select_evidence, SelectionQuery, SelectionResult};
pub use text::{Sentence, TokenBudget};
pub use triples::Triple;
