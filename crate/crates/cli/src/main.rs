use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ksllm::config::Settings;
use ksllm::datasets::{generate_evidence, save_jsonl, QARecord};
use ksllm::evaluation::{
    emit_report, render_report, run_method, score_predictions, sweep_k, sweep_length, EmitOptions,
    Pipeline, PredictionLine, ReportFormat, RunReport, ScoreRow,
};
use ksllm::store::CacheCounts;
use ksllm::{MethodId, TokenBudget};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "ksllm", version, about = "Knowledge-selection question answering experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set selection.k=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Report format: csv, markdown or jsonl.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Abort on the first malformed dataset line.
    #[arg(long, global = true, conflicts_with = "lenient")]
    strict: bool,
    /// Skip malformed dataset lines with a warning.
    #[arg(long, global = true)]
    lenient: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured method over the dataset.
    Run,
    /// Run KS-LLM once per k.
    SweepK {
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6])]
        ks: Vec<usize>,
    },
    /// Run a document baseline once per evidence token budget.
    SweepLength {
        #[arg(long, value_delimiter = ',', default_values_t = [300, 500, 1000, 2000])]
        budgets: Vec<usize>,
    },
    /// Generate evidence documents for records without one.
    GenEvidence {
        /// Output JSONL; defaults to `<output.path>/<dataset>.evidence.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rescore a predictions JSONL file against the dataset.
    Score {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Print cumulative cache hit/miss counts and entry totals.
    CacheStats,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::SweepK { .. } => "sweep-k",
            Command::SweepLength { .. } => "sweep-length",
            Command::GenEvidence { .. } => "gen-evidence",
            Command::Score { .. } => "score",
            Command::CacheStats => "cache-stats",
        }
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(String),
    Run(String),
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn settings(g: &Global) -> Result<Settings, Failure> {
    let mut overrides = g.overrides.clone();
    if let Some(f) = &g.format {
        overrides.push(format!("output.format={f}"));
    }
    if g.strict {
        overrides.push("dataset.lenient=false".into());
    }
    if g.lenient {
        overrides.push("dataset.lenient=true".into());
    }
    Settings::load(g.config.as_deref(), &overrides).map_err(|e| Failure::Usage(e.to_string()))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let settings = settings(&cli.global)?;
    eprintln!("# effective configuration\n{}", settings.effective().trim_end());
    let name = cli.command.name();
    match cli.command {
        Command::CacheStats => cache_stats(&settings),
        Command::Score { predictions } => score(&settings, &predictions),
        Command::GenEvidence { out } => {
            let pipeline = settings.build_pipeline().map_err(run_err)?;
            let records = augmented(&settings, &pipeline, load_records(&settings)?)?;
            let out = out.unwrap_or_else(|| {
                settings
                    .output
                    .path
                    .join(format!("{}.evidence.jsonl", settings.dataset_name()))
            });
            create_parent(&out)?;
            save_jsonl(&out, &records).map_err(run_err)?;
            eprintln!("wrote {}", out.display());
            record_cache_stats(&settings, &pipeline)
        }
        command => {
            let pipeline = settings.build_pipeline().map_err(run_err)?;
            let mut records = load_records(&settings)?;
            if settings.dataset.generate_evidence {
                records = augmented(&settings, &pipeline, records)?;
            }
            let base = settings.run_config();
            let reports = match command {
                Command::Run => vec![run_method(&base, &records, &pipeline).map_err(run_err)?],
                Command::SweepK { ks } => {
                    if ks.contains(&0) {
                        return Err(Failure::Usage("--ks values must be at least 1".into()));
                    }
                    sweep_k(&base, &ks, &records, &pipeline).map_err(run_err)?
                }
                Command::SweepLength { budgets } => {
                    let budgets = budgets
                        .into_iter()
                        .map(TokenBudget::new)
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| Failure::Usage(e.to_string()))?;
                    let mut cfg = base;
                    if !matches!(cfg.method, MethodId::StandardDoc | MethodId::CotDoc) {
                        log::info!("{} has no document budget; sweeping standard_doc", cfg.method);
                        cfg.method = MethodId::StandardDoc;
                    }
                    sweep_length(&cfg, &budgets, &records, &pipeline).map_err(run_err)?
                }
                _ => unreachable!("handled above"),
            };
            write_reports(&settings, name, &reports)?;
            record_cache_stats(&settings, &pipeline)
        }
    }
}

fn load_records(settings: &Settings) -> Result<Vec<QARecord>, Failure> {
    let loaded = settings.load_dataset().map_err(run_err)?;
    for (line, reason) in &loaded.skipped {
        log::warn!("skipped dataset line {line}: {reason}");
    }
    Ok(loaded.records)
}

fn augmented(
    settings: &Settings,
    pipeline: &Pipeline,
    records: Vec<QARecord>,
) -> Result<Vec<QARecord>, Failure> {
    let mut generated = 0;
    let out = records
        .into_iter()
        .map(|r| {
            if r.evidence.is_some() {
                return Ok(r);
            }
            generated += 1;
            generate_evidence(&r, pipeline.client.as_ref(), &pipeline.llm_cache).map_err(run_err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if generated > 0 {
        eprintln!("generated evidence for {generated} record(s) of {}", settings.dataset_name());
    }
    Ok(out)
}

fn create_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p)
            .map_err(|e| Failure::Run(format!("cannot create {}: {e}", p.display()))),
        _ => Ok(()),
    }
}

fn write_reports(settings: &Settings, command: &str, reports: &[RunReport]) -> Result<(), Failure> {
    let format = settings.report_format().map_err(|e| Failure::Usage(e.to_string()))?;
    let opts = EmitOptions {
        redact_timings: settings.output.redact_timings,
    };
    let dir = &settings.output.path;
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
    let mut formats = vec![format];
    if format != ReportFormat::Jsonl {
        formats.push(ReportFormat::Jsonl);
    }
    for f in formats {
        let path = dir.join(format!("{command}.{}", f.extension()));
        emit_report(reports, f, &path, opts).map_err(run_err)?;
        eprintln!("wrote {}", path.display());
    }
    let summary = if format == ReportFormat::Jsonl { ReportFormat::Csv } else { format };
    print!("{}", render_report(reports, summary, opts));
    Ok(())
}

fn score(settings: &Settings, predictions: &Path) -> Result<(), Failure> {
    let records = load_records(settings)?;
    let preds = PredictionLine::load(predictions).map_err(run_err)?;
    let rows = score_predictions(&records, &preds).map_err(run_err)?;
    let format = settings.report_format().map_err(|e| Failure::Usage(e.to_string()))?;
    print!("{}", render_scores(&rows, format));
    Ok(())
}

fn render_scores(rows: &[ScoreRow], format: ReportFormat) -> String {
    let method = |r: &ScoreRow| if r.method.is_empty() { "-".to_owned() } else { r.method.clone() };
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("method,n,n_failed,em_percent\n");
            for r in rows {
                out += &format!("{},{},{},{}\n", method(r), r.n, r.n_failed, r.em_percent());
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from("| method | n | n_failed | em_percent |\n|---|---|---|---|\n");
            for r in rows {
                out += &format!("| {} | {} | {} | {} |\n", method(r), r.n, r.n_failed, r.em_percent());
            }
            out
        }
        ReportFormat::Jsonl => rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("score row serializes") + "\n")
            .collect(),
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct StoredStats {
    llm: CacheCounts,
    emb: CacheCounts,
}

const STATS_FILE: &str = "stats.json";

fn add(a: &mut CacheCounts, b: CacheCounts) {
    a.hits += b.hits;
    a.misses += b.misses;
    a.corrupt += b.corrupt;
}

fn read_stats(dir: &Path) -> StoredStats {
    std::fs::read_to_string(dir.join(STATS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default()
}

/// Adds this process's cache counters to the totals kept in the cache dir.
fn record_cache_stats(settings: &Settings, pipeline: &Pipeline) -> Result<(), Failure> {
    let llm = pipeline.llm_cache.stats();
    let emb = pipeline.embedding_cache.stats();
    eprintln!(
        "cache: llm {} hit(s) {} miss(es), embeddings {} hit(s) {} miss(es)",
        llm.hits, llm.misses, emb.hits, emb.misses
    );
    let Some(dir) = &settings.cache.dir else {
        return Ok(());
    };
    let mut stats = read_stats(dir);
    add(&mut stats.llm, llm);
    add(&mut stats.emb, emb);
    std::fs::create_dir_all(dir)
        .and_then(|()| std::fs::write(dir.join(STATS_FILE), serde_json::to_string_pretty(&stats).expect("stats serialize")))
        .map_err(|e| Failure::Run(format!("cannot write cache stats: {e}")))
}

fn cache_stats(settings: &Settings) -> Result<(), Failure> {
    let dir = settings
        .cache
        .dir
        .as_deref()
        .ok_or_else(|| Failure::Usage("cache.dir is not set".into()))?;
    let stats = read_stats(dir);
    let pipeline = settings.build_pipeline().map_err(run_err)?;
    let entries = |s: Option<&ksllm::store::JsonStore>| s.map_or(0, |s| s.len());
    println!("namespace,entries,hits,misses,corrupt");
    for (ns, n, c) in [
        ("llm", entries(pipeline.llm_cache.store()), stats.llm),
        ("emb", entries(pipeline.embedding_cache.store()), stats.emb),
    ] {
        println!("{ns},{n},{},{},{}", c.hits, c.misses, c.corrupt);
    }
    Ok(())
}
