use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use super::{EvalError, RecordOutcome, RunReport};

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "dataset",
    "model",
    "k",
    "max_tokens",
    "n",
    "n_failed",
    "em_percent",
    "wall_time_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
            ReportFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Write every timing as zero so repeated runs are byte-identical.
    pub redact_timings: bool,
}

fn sorted(reports: &[RunReport]) -> Vec<&RunReport> {
    let mut v: Vec<&RunReport> = reports.iter().collect();
    v.sort_by(|a, b| {
        (&a.dataset, a.method, a.k, a.max_tokens).cmp(&(&b.dataset, b.method, b.k, b.max_tokens))
    });
    v
}

fn row(r: &RunReport, opts: EmitOptions) -> [String; 9] {
    let wall = if opts.redact_timings { 0 } else { r.wall_time.as_millis() };
    [
        r.method.as_str().to_owned(),
        r.dataset.clone(),
        r.model.clone(),
        r.k.map(|k| k.to_string()).unwrap_or_default(),
        r.max_tokens.map(|b| b.to_string()).unwrap_or_default(),
        r.n.to_string(),
        r.n_failed.to_string(),
        r.em_percent(),
        wall.to_string(),
    ]
}

pub fn render_report(reports: &[RunReport], format: ReportFormat, opts: EmitOptions) -> String {
    let reports = sorted(reports);
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(CSV_HEADER).expect("in-memory write");
            for r in &reports {
                w.write_record(row(r, opts)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", CSV_HEADER.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(CSV_HEADER.len()));
            for r in &reports {
                let mut cells = row(r, opts);
                cells[0] = r.method.label().to_owned();
                for c in cells.iter_mut().skip(3).take(2) {
                    if c.is_empty() {
                        *c = "-".into();
                    }
                }
                let cells: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
                let _ = writeln!(out, "| {} |", cells.join(" | "));
            }
            out
        }
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for r in &reports {
                for o in &r.per_record {
                    let line = if opts.redact_timings {
                        let mut o = o.clone();
                        o.timings_ms.values_mut().for_each(|v| *v = 0.0);
                        serde_json::to_string(&o)
                    } else {
                        serde_json::to_string(o)
                    }
                    .expect("outcome serializes");
                    out.push_str(&line);
                    out.push('\n');
                }
            }
            out
        }
    }
}

/// Writes `reports` to `path`; rows are ordered by dataset, method, k and
/// document budget.
pub fn emit_report(
    reports: &[RunReport],
    format: ReportFormat,
    path: &Path,
    opts: EmitOptions,
) -> Result<(), EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Config("no reports to emit".into()));
    }
    std::fs::write(path, render_report(reports, format, opts)).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads per-record outcomes written in the JSONL report format.
pub fn load_outcomes(path: &Path) -> Result<Vec<RecordOutcome>, EvalError> {
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
