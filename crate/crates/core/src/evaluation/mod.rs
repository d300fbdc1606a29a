//! Exact-match scoring, per-method pipelines, the `k` and evidence-length
//! sweeps, and report emission.

mod report;
mod runner;
mod score;

use thiserror::Error;

pub use report::{emit_report, load_outcomes, render_report, EmitOptions, ReportFormat, CSV_HEADER};
pub use runner::{
    process_record, run_method, sweep_k, sweep_length, Pipeline, RecordOutcome, RunConfig,
    RunReport,
};
pub use score::{score_predictions, PredictionLine, ScoreRow};

use crate::text::normalize_answer;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("prediction for unknown record id {0:?}")]
    UnknownId(String),
}

/// True iff the normalized prediction equals some normalized answer.
pub fn exact_match(prediction: &str, answers: &[String]) -> bool {
    let p = normalize_answer(prediction);
    answers.iter().any(|a| normalize_answer(a) == p)
}
