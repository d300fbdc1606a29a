//! Question-answering records and their JSONL form.
//!
//! One JSON object per line with keys `id` (string), `question` (string),
//! `answers` (array of strings) and an optional `evidence` (string). Blank
//! lines are ignored.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{complete_cached, evidence_prompt, LlmClient, LlmError, ResponseCache};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("record {id:?}: {message}")]
    Invalid { id: String, message: String },
    #[error("record {0:?} already has an evidence document")]
    HasEvidence(String),
    #[error("evidence generation failed for {id:?}: {source}")]
    Generation {
        id: String,
        #[source]
        source: LlmError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceSource {
    Provided,
    Generated,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    pub answers: Vec<String>,
    pub evidence: Option<String>,
    pub evidence_source: EvidenceSource,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    question: String,
    answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    evidence: Option<String>,
}

impl QARecord {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        answers: Vec<String>,
        evidence: Option<String>,
    ) -> Result<Self, DatasetError> {
        let id = id.into();
        let question = question.into();
        let invalid = |message: &str| DatasetError::Invalid {
            id: id.clone(),
            message: message.to_owned(),
        };
        if id.is_empty() {
            return Err(invalid("id is empty"));
        }
        if question.trim().is_empty() {
            return Err(invalid("question is empty"));
        }
        if answers.is_empty() {
            return Err(invalid("answers list is empty"));
        }
        if answers.iter().any(|a| a.trim().is_empty()) {
            return Err(invalid("answers contain an empty string"));
        }
        let evidence_source = if evidence.is_some() {
            EvidenceSource::Provided
        } else {
            EvidenceSource::Absent
        };
        Ok(Self {
            id,
            question,
            answers,
            evidence,
            evidence_source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed JSON lines and report them.
    Lenient,
}

#[derive(Debug, Default)]
pub struct Loaded {
    pub records: Vec<QARecord>,
    /// `(line number, reason)` for every line skipped in lenient mode.
    pub skipped: Vec<(usize, String)>,
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads records in file order. Duplicate ids and records violating the
/// record invariants are errors in both modes.
pub fn load_jsonl(path: &Path, mode: LoadMode) -> Result<Loaded, DatasetError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut loaded = Loaded::default();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) if mode == LoadMode::Lenient => {
                log::warn!("{}:{line_no}: skipping malformed line: {e}", path.display());
                loaded.skipped.push((line_no, e.to_string()));
                continue;
            }
            Err(e) => {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })
            }
        };
        if !seen.insert(raw.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: raw.id,
            });
        }
        let record = QARecord::new(raw.id, raw.question, raw.answers, raw.evidence).map_err(
            |e| match e {
                DatasetError::Invalid { id, message } => DatasetError::Invalid {
                    id,
                    message: format!("line {line_no}: {message}"),
                },
                other => other,
            },
        )?;
        loaded.records.push(record);
    }
    Ok(loaded)
}

pub fn save_jsonl(path: &Path, records: &[QARecord]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let raw = RawRecord {
            id: r.id.clone(),
            question: r.question.clone(),
            answers: r.answers.clone(),
            evidence: r.evidence.clone(),
        };
        let line = serde_json::to_string(&raw).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Asks the model to write a background document for a record that has none.
pub fn generate_evidence(
    record: &QARecord,
    client: &dyn LlmClient,
    cache: &ResponseCache,
) -> Result<QARecord, DatasetError> {
    if record.evidence.is_some() {
        return Err(DatasetError::HasEvidence(record.id.clone()));
    }
    let generation = |source| DatasetError::Generation {
        id: record.id.clone(),
        source,
    };
    let prompt = evidence_prompt(&record.question).map_err(|e| generation(e.into()))?;
    let text = complete_cached(&prompt, client, cache).map_err(generation)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(generation(LlmError::Protocol("empty evidence document".into())));
    }
    Ok(QARecord {
        evidence: Some(text.to_owned()),
        evidence_source: EvidenceSource::Generated,
        ..record.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedMockClient;

    fn write(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn loads_provided_evidence() {
        let f = write(&[
            r#"{"id":"q1","question":"What star sign is Jamie Lee Curtis?","answers":["Scorpio"],"evidence":"..."}"#,
        ]);
        let l = load_jsonl(f.path(), LoadMode::Strict).unwrap();
        assert_eq!(l.records.len(), 1);
        assert_eq!(l.records[0].evidence_source, EvidenceSource::Provided);
    }

    #[test]
    fn empty_file() {
        let f = write(&[]);
        assert!(load_jsonl(f.path(), LoadMode::Strict).unwrap().records.is_empty());
    }

    #[test]
    fn empty_answers_name_the_record() {
        let f = write(&[r#"{"id":"bad1","question":"q?","answers":[]}"#]);
        let err = load_jsonl(f.path(), LoadMode::Lenient).unwrap_err();
        assert!(err.to_string().contains("bad1"), "{err}");
    }

    #[test]
    fn malformed_lines_strict_and_lenient() {
        let f = write(&[
            r#"{"id":"a","question":"q?","answers":["x"]}"#,
            "{not json",
            r#"{"id":"b","question":"q?","answers":["y"]}"#,
        ]);
        match load_jsonl(f.path(), LoadMode::Strict) {
            Err(DatasetError::Malformed { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let l = load_jsonl(f.path(), LoadMode::Lenient).unwrap();
        let ids: Vec<_> = l.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(l.skipped.len(), 1);
        assert_eq!(l.skipped[0].0, 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write(&[
            r#"{"id":"a","question":"q?","answers":["x"]}"#,
            r#"{"id":"a","question":"q2?","answers":["y"]}"#,
        ]);
        assert!(matches!(
            load_jsonl(f.path(), LoadMode::Lenient),
            Err(DatasetError::DuplicateId { line: 2, .. })
        ));
    }

    #[test]
    fn evidence_generation() {
        let rec = QARecord::new("w1", "Who founded Microsoft?", vec!["Bill Gates".into()], None).unwrap();
        let doc = "Microsoft was founded in 1975. Its founders were Bill Gates and Paul Allen.";
        let client = ScriptedMockClient::from_pairs([("background document", doc)], None);
        let cache = ResponseCache::in_memory();
        let out = generate_evidence(&rec, &client, &cache).unwrap();
        assert_eq!(out.evidence_source, EvidenceSource::Generated);
        assert_eq!(out.evidence.as_deref(), Some(doc));
        generate_evidence(&rec, &client, &cache).unwrap();
        assert_eq!(client.invocations(), 1);
        assert!(matches!(
            generate_evidence(&out, &client, &cache),
            Err(DatasetError::HasEvidence(_))
        ));
    }
}
