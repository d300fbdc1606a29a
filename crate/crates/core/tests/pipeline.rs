mod common;

use std::sync::Arc;

use common::*;
use ksllm::datasets::generate_evidence;
use ksllm::embedding::{CountingEmbedder, EmbeddingCache, HashEmbedder};
use ksllm::evaluation::{
    emit_report, load_outcomes, process_record, render_report, run_method, score_predictions,
    sweep_k, sweep_length, EmitOptions, Pipeline, PredictionLine, ReportFormat,
};
use ksllm::llm::{ResponseCache, ScriptedMockClient, Task};
use ksllm::selection::{QueryMode, SelectionQuery};
use ksllm::text::split_sentences;
use ksllm::{select_evidence, MethodId, RunConfig, TokenBudget};

fn hash_pipeline(client: Arc<ScriptedMockClient>) -> Pipeline {
    Pipeline::new(client, Arc::new(HashEmbedder::new(256).unwrap()))
}

fn config(method: MethodId) -> RunConfig {
    RunConfig {
        method,
        dataset: "desk20".into(),
        ..RunConfig::default()
    }
}

#[test]
fn star_sign_direct_selection() {
    let rec = record("curtis");
    let sentences = split_sentences(rec.evidence.as_deref().unwrap());
    assert_eq!(sentences.len(), 5);
    let query = SelectionQuery::new(QueryMode::Triples, CURTIS_QUERY.into()).unwrap();
    let sel = select_evidence(&query, &sentences, 2, &curtis_embedder(), &EmbeddingCache::in_memory()).unwrap();
    assert_eq!(sel.indices, vec![1, 4]);
    assert_eq!(sel.sentences[0].text, CURTIS_BORN);
    assert_eq!(sel.sentences[1].text, CURTIS_SCORPIO);
    assert!(sel.distances[0] <= sel.distances[1]);
}

#[test]
fn star_sign_end_to_end() {
    let client = desk_mock();
    let pipeline = Pipeline::new(client.clone(), Arc::new(curtis_embedder()));
    let out = process_record(&record("curtis"), &config(MethodId::KsLlm), &pipeline);
    assert!(!out.failed, "{:?}", out.diagnostics);
    assert_eq!(out.triple_count, 3);
    assert_eq!(out.selected_indices, vec![1, 4]);
    assert_eq!(out.prediction, "Scorpio");
    assert_eq!(out.em, 1);
    let answer = client.prompts().into_iter().find(|p| p.task == Task::Answer(MethodId::KsLlm)).unwrap();
    let text = answer.user_content();
    assert!(text.contains(CURTIS_BORN) && text.contains(CURTIS_SCORPIO));
    assert!(text.find(CURTIS_BORN) < text.find(CURTIS_SCORPIO));
    assert!(!text.contains("Her parents"));
}

#[test]
fn last_home_run_outcome_pattern() {
    let rec = record("ruth");
    let pipeline = hash_pipeline(desk_mock());
    let ks = process_record(&rec, &config(MethodId::KsLlm), &pipeline);
    assert_eq!(ks.triple_count, 5);
    assert_eq!(ks.selected_indices.len(), 2);
    let sentences = split_sentences(rec.evidence.as_deref().unwrap());
    assert!(ks
        .selected_indices
        .iter()
        .any(|&i| sentences[i].text.contains("playing out the string with the Boston Braves")));
    assert_eq!((ks.prediction.as_str(), ks.em), ("Boston Braves", 1));
    let std = process_record(&rec, &config(MethodId::Standard), &pipeline);
    assert_eq!((std.prediction.as_str(), std.em), ("Babe Ruth", 0));
    let doc = process_record(&rec, &config(MethodId::StandardDoc), &pipeline);
    assert_eq!((doc.prediction.as_str(), doc.em), ("Philadelphia Athletics", 0));
}

#[test]
fn prompts_carry_only_their_method_ingredients() {
    let rec = record("curtis");
    for method in MethodId::ALL {
        let client = desk_mock();
        let pipeline = Pipeline::new(client.clone(), Arc::new(curtis_embedder()));
        let out = process_record(&rec, &config(method), &pipeline);
        assert!(!out.failed, "{method}: {:?}", out.diagnostics);
        let prompts = client.prompts();
        let triple_calls = prompts.iter().filter(|p| p.task == Task::ConstructTriples).count();
        assert_eq!(triple_calls, usize::from(method.needs_triples()), "{method}");
        let answer = prompts.iter().find(|p| p.task == Task::Answer(method)).unwrap();
        let text = answer.user_content();
        let has_doc = text.contains("Document:\n");
        assert_eq!(has_doc, matches!(method, MethodId::StandardDoc | MethodId::CotDoc), "{method}");
        let shows_triples = matches!(method, MethodId::KsT | MethodId::KsLlm);
        assert_eq!(text.contains("Knowledge triples:"), shows_triples, "{method}");
        assert_eq!(text.contains("Evidence sentences:"), method.selects_sentences(), "{method}");
        assert_eq!(text.contains("step by step"), method == MethodId::CotDoc, "{method}");
        assert_eq!(out.selected_indices.is_empty(), !method.selects_sentences(), "{method}");
    }
}

#[test]
fn ks_q_selects_with_the_question() {
    let out = process_record(
        &record("curtis"),
        &RunConfig { k: 1, ..config(MethodId::KsQ) },
        &Pipeline::new(desk_mock(), Arc::new(curtis_embedder())),
    );
    // The question sits on the "actress" sentence in the lookup geometry.
    assert_eq!(out.selected_indices, vec![0]);
    assert_eq!(out.triple_count, 0);
}

#[test]
fn missing_evidence_fails_the_record_only() {
    let records = desk_records();
    let report = run_method(&config(MethodId::KsLlm), &records, &hash_pipeline(desk_mock())).unwrap();
    assert_eq!(report.n, 20);
    assert_eq!(report.n_failed, 6);
    for o in report.per_record.iter().filter(|o| o.failed) {
        assert!(o.diagnostics.iter().any(|d| d.contains("missing evidence")));
    }
    let standard = run_method(&config(MethodId::Standard), &records, &hash_pipeline(desk_mock())).unwrap();
    assert_eq!(standard.n_failed, 0);
}

#[test]
fn all_unknown_answers_score_zero() {
    let client = Arc::new(ScriptedMockClient::from_pairs(Vec::<(&str, &str)>::new(), Some("unknown")));
    let report = run_method(&config(MethodId::Standard), &desk_records(), &hash_pipeline(client)).unwrap();
    assert_eq!((report.n, report.n_failed, report.em), (20, 0, 0.0));
    assert_eq!(report.em_percent(), "0.00");
}

#[test]
fn sweep_k_reuses_triples_and_embeddings() {
    let records: Vec<_> = desk_records().into_iter().filter(|r| r.evidence.is_some()).collect();
    let client = desk_mock();
    let embedder = Arc::new(CountingEmbedder::new(Arc::new(HashEmbedder::new(256).unwrap())));
    let pipeline = Pipeline::new(client.clone(), embedder.clone());
    let reports = sweep_k(&config(MethodId::KsLlm), &[1, 2, 3, 4, 5], &records, &pipeline).unwrap();
    assert_eq!(reports.len(), 5);
    let triple_calls = client.prompts().iter().filter(|p| p.task == Task::ConstructTriples).count();
    assert_eq!(triple_calls, records.len());
    assert_eq!(embedder.calls(), records.len() as u64);
    for (r, k) in reports.iter().zip(1..) {
        assert_eq!(r.k, Some(k));
        for o in &r.per_record {
            assert_eq!(o.selected_indices.len(), k.min(sentence_count(o)));
        }
    }
    let fresh = hash_pipeline(desk_mock());
    let single = run_method(&config(MethodId::KsLlm), &records, &fresh).unwrap();
    let swept = sweep_k(&config(MethodId::KsLlm), &[2], &records, &hash_pipeline(desk_mock())).unwrap();
    assert_eq!(strip(&swept[0]), strip(&single));
}

fn sentence_count(o: &ksllm::evaluation::RecordOutcome) -> usize {
    o.diagnostics
        .iter()
        .find_map(|d| d.strip_prefix("document_sentences="))
        .unwrap()
        .parse()
        .unwrap()
}

fn strip(r: &ksllm::RunReport) -> String {
    render_report(std::slice::from_ref(r), ReportFormat::Jsonl, EmitOptions { redact_timings: true })
}

#[test]
fn sweep_length_budgets() {
    let records = desk_records();
    let cfg = config(MethodId::StandardDoc);
    let budgets = [TokenBudget::new(300).unwrap(), TokenBudget::new(500).unwrap()];
    let reports = sweep_length(&cfg, &budgets, &records, &hash_pipeline(desk_mock())).unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[1].max_tokens, Some(budgets[1]));
    assert!(reports.iter().all(|r| r.wall_time.as_nanos() > 0));
    let single = run_method(&cfg, &records, &hash_pipeline(desk_mock())).unwrap();
    let swept = sweep_length(&cfg, &budgets[..1], &records, &hash_pipeline(desk_mock())).unwrap();
    assert_eq!(strip(&swept[0]), strip(&single));
    assert!(sweep_length(&config(MethodId::KsLlm), &budgets, &records, &hash_pipeline(desk_mock())).is_err());
}

#[test]
fn reports_round_trip_and_rescore() {
    let records = desk_records();
    let report = run_method(&config(MethodId::StandardDoc), &records, &hash_pipeline(desk_mock())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    emit_report(std::slice::from_ref(&report), ReportFormat::Jsonl, &path, EmitOptions::default()).unwrap();
    assert_eq!(load_outcomes(&path).unwrap(), report.per_record);
    let preds = PredictionLine::load(&path).unwrap();
    let rows = score_predictions(&records, &preds).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].method, "standard_doc");
    assert_eq!((rows[0].n, rows[0].n_failed), (report.n, report.n_failed));
    assert_eq!(rows[0].em, report.em);

    let csv = dir.path().join("run.csv");
    emit_report(std::slice::from_ref(&report), ReportFormat::Csv, &csv, EmitOptions::default()).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("method,dataset,model,k,max_tokens,n,n_failed,em_percent,wall_time_ms\n"));
    assert!(text.contains("standard_doc,desk20,mock-13b,,300,20,6,"));
    let md = render_report(std::slice::from_ref(&report), ReportFormat::Markdown, EmitOptions::default());
    assert!(md.contains("| Standard+doc | desk20 | mock-13b | - | 300 |"));
}

#[test]
fn generated_evidence_fills_the_gaps() {
    let cache = ResponseCache::in_memory();
    let client = desk_mock();
    let records: Vec<_> = desk_records()
        .into_iter()
        .map(|r| match r.evidence {
            Some(_) => r,
            None => generate_evidence(&r, client.as_ref(), &cache).unwrap(),
        })
        .collect();
    assert!(records.iter().all(|r| r.evidence.is_some()));
    let generated = records
        .iter()
        .filter(|r| r.evidence_source == ksllm::EvidenceSource::Generated)
        .count();
    assert_eq!(generated, 6);
    let report = run_method(&config(MethodId::KsLlm), &records, &hash_pipeline(client)).unwrap();
    assert_eq!(report.n_failed, 0);
}

#[test]
fn concurrency_does_not_change_results() {
    let records = desk_records();
    for method in MethodId::ALL {
        let one = run_method(&config(method), &records, &hash_pipeline(desk_mock())).unwrap();
        let eight = run_method(
            &RunConfig { concurrency: 8, ..config(method) },
            &records,
            &hash_pipeline(desk_mock()),
        )
        .unwrap();
        assert_eq!(strip(&one), strip(&eight), "{method}");
        let ids: Vec<_> = one.per_record.iter().map(|o| o.id.as_str()).collect();
        let expected: Vec<_> = records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, expected);
    }
}
