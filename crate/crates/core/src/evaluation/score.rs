use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{exact_match, EvalError};
use crate::datasets::QARecord;

/// One line of a predictions file. Report JSONL lines qualify; so does a bare
/// `{"id": .., "prediction": ..}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub prediction: String,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub failed: bool,
}

impl PredictionLine {
    pub fn load(path: &Path) -> Result<Vec<Self>, EvalError> {
        let io = |source| EvalError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io)?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| EvalError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    /// Empty when the predictions carry no method.
    pub method: String,
    pub n: usize,
    pub n_failed: usize,
    pub em: f64,
}

impl ScoreRow {
    pub fn em_percent(&self) -> String {
        format!("{:.2}", self.em * 100.0)
    }
}

/// Offline exact-match rescoring, one row per method present in the file.
/// Failed predictions are counted but excluded from the mean.
pub fn score_predictions(
    records: &[QARecord],
    predictions: &[PredictionLine],
) -> Result<Vec<ScoreRow>, EvalError> {
    let answers: HashMap<&str, &[String]> = records
        .iter()
        .map(|r| (r.id.as_str(), r.answers.as_slice()))
        .collect();
    let mut groups: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for p in predictions {
        let gold = answers
            .get(p.id.as_str())
            .ok_or_else(|| EvalError::UnknownId(p.id.clone()))?;
        let g = groups.entry(p.method.clone().unwrap_or_default()).or_default();
        g.0 += 1;
        if p.failed {
            g.1 += 1;
        } else if exact_match(&p.prediction, gold) {
            g.2 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(method, (n, n_failed, hits))| {
            let scored = n - n_failed;
            ScoreRow {
                method,
                n,
                n_failed,
                em: if scored == 0 { 0.0 } else { hits as f64 / scored as f64 },
            }
        })
        .collect())
}
