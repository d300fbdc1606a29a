mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use common::stub::serve;
use ksllm::embedding::{embed, EmbedError, RemoteEmbedder};
use ksllm::llm::{generate_answer, triple_prompt, ChatClient, LlmClient, LlmError, ResponseCache};
use ksllm::retry::RetryPolicy;
use serde_json::json;

fn fast_retry() -> RetryPolicy {
    RetryPolicy {
        base_delay: Duration::from_millis(5),
        ..RetryPolicy::default()
    }
}

fn fake_embeddings(req: &common::stub::Request) -> String {
    let inputs = req.body["input"].as_array().unwrap();
    // Reverse order on the wire to check index-based reassembly.
    let data: Vec<_> = inputs
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"index": i, "embedding": [t.as_str().unwrap().len() as f64, i as f64, 1.0]}))
        .collect();
    json!({"data": data}).to_string()
}

#[test]
fn remote_embedder_preserves_order_and_count() {
    let stub = serve(|req, _| (200, fake_embeddings(req)));
    std::env::set_var("KSLLM_TEST_EMB_KEY", "secret-token");
    let e = RemoteEmbedder::new(
        &format!("{}/v1/embeddings", stub.url),
        "bert-base",
        Some("KSLLM_TEST_EMB_KEY"),
        Duration::from_secs(5),
        2,
        fast_retry(),
    )
    .unwrap();
    let out = embed(&e, &["a", "bb", "ccc"]).unwrap();
    assert_eq!(out.len(), 3);
    assert!(out.iter().all(|v| v.dim() == 3));
    assert_eq!(out[0].values()[0], 1.0);
    assert_eq!(out[2].values()[0], 3.0);
    // max_batch = 2 splits three texts into two requests.
    assert_eq!(stub.hits.load(Ordering::SeqCst), 2);
    let reqs = stub.requests.lock().unwrap();
    assert_eq!(reqs[0].body["model"], "bert-base");
    assert_eq!(reqs[0].body["input"], json!(["a", "bb"]));
    assert_eq!(reqs[0].authorization.as_deref(), Some("Bearer secret-token"));
}

#[test]
fn remote_embedder_retries_then_succeeds() {
    let stub = serve(|req, n| if n <= 2 { (503, "{}".into()) } else { (200, fake_embeddings(req)) });
    let e = RemoteEmbedder::new(&stub.url, "m", None, Duration::from_secs(5), 8, fast_retry()).unwrap();
    assert_eq!(embed(&e, &["x"]).unwrap().len(), 1);
    assert_eq!(stub.hits.load(Ordering::SeqCst), 3);
}

#[test]
fn remote_embedder_reports_attempts_on_exhaustion() {
    let stub = serve(|_, _| (500, "{}".into()));
    let e = RemoteEmbedder::new(&stub.url, "m", None, Duration::from_secs(5), 8, fast_retry()).unwrap();
    match embed(&e, &["x"]) {
        Err(EmbedError::Transport { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(stub.hits.load(Ordering::SeqCst), 4);
}

#[test]
fn remote_embedder_protocol_errors() {
    let stub = serve(|_, _| (200, json!({"data": [{"index": 0, "embedding": [1.0]}]}).to_string()));
    let e = RemoteEmbedder::new(&stub.url, "m", None, Duration::from_secs(5), 8, fast_retry()).unwrap();
    assert!(matches!(embed(&e, &["x", "y"]), Err(EmbedError::Protocol(_))));

    let stub = serve(|_, _| {
        (200, json!({"data": [{"index": 0, "embedding": [1.0]}, {"index": 1, "embedding": [1.0, 2.0]}]}).to_string())
    });
    let e = RemoteEmbedder::new(&stub.url, "m", None, Duration::from_secs(5), 8, fast_retry()).unwrap();
    assert!(matches!(embed(&e, &["x", "y"]), Err(EmbedError::DimensionMismatch { .. })));

    let stub = serve(|_, _| (400, "{\"error\":\"bad\"}".into()));
    let e = RemoteEmbedder::new(&stub.url, "m", None, Duration::from_secs(5), 8, fast_retry()).unwrap();
    assert!(matches!(embed(&e, &["x"]), Err(EmbedError::Protocol(_))));
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn missing_api_key_variable_is_an_error() {
    let r = RemoteEmbedder::new("http://localhost:1", "m", Some("KSLLM_SURELY_UNSET_VAR"), Duration::from_secs(1), 1, fast_retry());
    assert!(matches!(r, Err(EmbedError::Input(_))));
}

#[test]
fn chat_client_wire_format_and_cache() {
    let stub = serve(|_, _| {
        (200, json!({"choices": [{"message": {"role": "assistant", "content": "Answer: Scorpio"}}]}).to_string())
    });
    let client = ChatClient::new(&format!("{}/v1/", stub.url), "vicuna-13b", None, Duration::from_secs(5), 4, fast_retry()).unwrap();
    assert!(client.url().ends_with("/v1/chat/completions"));
    let prompt = triple_prompt("What star sign is Jamie Lee Curtis?").unwrap();
    let cache = ResponseCache::in_memory();
    assert_eq!(generate_answer(&prompt, &client, &cache).unwrap(), "Scorpio");
    assert_eq!(generate_answer(&prompt, &client, &cache).unwrap(), "Scorpio");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1);
    let reqs = stub.requests.lock().unwrap();
    let body = &reqs[0].body;
    assert_eq!(reqs[0].path, "/v1/chat/completions");
    assert_eq!(body["model"], "vicuna-13b");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["max_tokens"], prompt.params.max_output_tokens);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(body["messages"][1]["content"], prompt.user_content());
}

#[test]
fn chat_client_transport_failure() {
    let stub = serve(|_, _| (502, "{}".into()));
    let client = ChatClient::new(&stub.url, "m", None, Duration::from_secs(5), 1, fast_retry()).unwrap();
    let prompt = triple_prompt("q?").unwrap();
    match client.complete(&prompt) {
        Err(LlmError::Transport { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
    let bad = serve(|_, _| (200, json!({"choices": []}).to_string()));
    let client = ChatClient::new(&bad.url, "m", None, Duration::from_secs(5), 1, fast_retry()).unwrap();
    assert!(matches!(client.complete(&prompt), Err(LlmError::Protocol(_))));
}

#[test]
fn connection_refused_is_retryable() {
    // Bind and drop to get a port with nothing listening.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = ChatClient::new(&format!("http://127.0.0.1:{port}"), "m", None, Duration::from_secs(2), 1, fast_retry()).unwrap();
    assert!(matches!(
        client.complete(&triple_prompt("q?").unwrap()),
        Err(LlmError::Transport { attempts: 4, .. })
    ));
}
