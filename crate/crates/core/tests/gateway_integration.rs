//! End-to-end gateway behavior: full mock runs, checkpoint resume, the
//! malformed-completion corpus, and the HTTP client against a local
//! single-purpose server.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use serde::Deserialize;

use valign_core::catalog::default_catalog;
use valign_core::context::enumerate_contexts;
use valign_core::gateway::{
    parse_score, read_score_jsonl_path, run_evaluation, EvalOptions, GatewayError, HttpBackend,
    MockBackend, ModelConfig, ScoreOutcome,
};
use valign_core::prompt::{PromptEngine, PromptRecord};

fn full_batch() -> Vec<PromptRecord> {
    let engine = PromptEngine::bundled();
    engine
        .generate_prompt_batch(&enumerate_contexts(), default_catalog())
        .iter()
        .map(|p| p.to_record())
        .collect()
}

#[test]
fn full_mock_run_has_12544_records_and_zero_missing() {
    let batch = full_batch();
    assert_eq!(batch.len(), 12_544);
    let backend = MockBackend::new(42);
    let summary = run_evaluation(&backend, &ModelConfig::mock(), &batch, &EvalOptions::default())
        .unwrap();
    assert_eq!(summary.records.len(), 12_544);
    assert_eq!(summary.missing, 0);
    assert_eq!(summary.requests_issued, 12_544);
    assert!(!summary.degraded);
}

#[test]
fn checkpoint_files_are_byte_identical_across_runs() {
    let batch = full_batch();
    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.jsonl");
    let path_b = dir.path().join("b.jsonl");
    for path in [&path_a, &path_b] {
        let options = EvalOptions {
            checkpoint: Some(path.clone()),
            resume: false,
        };
        run_evaluation(&MockBackend::new(42), &ModelConfig::mock(), &batch, &options).unwrap();
    }
    let a = std::fs::read(&path_a).unwrap();
    let b = std::fs::read(&path_b).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn resume_reissues_only_the_unfinished_prompts() {
    let batch = full_batch();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");

    // simulate a run interrupted at record 6000
    let options = EvalOptions {
        checkpoint: Some(path.clone()),
        resume: false,
    };
    run_evaluation(
        &MockBackend::new(42),
        &ModelConfig::mock(),
        &batch[..6000],
        &options,
    )
    .unwrap();
    assert_eq!(read_score_jsonl_path(&path).unwrap().len(), 6000);

    let backend = MockBackend::new(42);
    let options = EvalOptions {
        checkpoint: Some(path.clone()),
        resume: true,
    };
    let summary = run_evaluation(&backend, &ModelConfig::mock(), &batch, &options).unwrap();
    assert_eq!(backend.calls(), 6544);
    assert_eq!(summary.requests_issued, 6544);
    assert_eq!(summary.reused_from_checkpoint, 6000);
    assert_eq!(summary.records.len(), 12_544);
    assert_eq!(read_score_jsonl_path(&path).unwrap().len(), 12_544);

    // resuming a complete run issues nothing
    let backend = MockBackend::new(42);
    let summary = run_evaluation(&backend, &ModelConfig::mock(), &batch, &options).unwrap();
    assert_eq!(backend.calls(), 0);
    assert_eq!(summary.requests_issued, 0);
}

#[derive(Deserialize)]
struct CorpusEntry {
    name: String,
    text: String,
    expected: ScoreOutcome,
}

#[test]
fn malformed_corpus_resolves_to_documented_outcomes() {
    let corpus = include_str!("../fixtures/malformed_completions.jsonl");
    let map = valign_core::catalog::OptionScheme::five_point().option_map();
    let mut entries = 0;
    for line in corpus.lines().filter(|l| !l.trim().is_empty()) {
        let entry: CorpusEntry = serde_json::from_str(line).unwrap();
        entries += 1;
        let outcome = parse_score(&entry.text, &map);
        assert_eq!(
            outcome, entry.expected,
            "corpus entry `{}` parsed to {outcome:?}",
            entry.name
        );
    }
    assert!(entries >= 20, "corpus has only {entries} entries");
}

// -- minimal HTTP server ---------------------------------------------------

struct ScriptedServer {
    url: String,
    requests: Arc<Mutex<Vec<String>>>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl ScriptedServer {
    /// Serves the scripted (status, headers, body) responses once each,
    /// closing the connection after every response.
    fn start(responses: Vec<(u16, Vec<(String, String)>, String)>) -> ScriptedServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind local listener");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let seen = Arc::clone(&requests);
        let handle = std::thread::spawn(move || {
            for (status, headers, body) in responses {
                let Ok((mut stream, _)) = listener.accept() else {
                    return;
                };
                let mut raw = Vec::new();
                let mut buf = [0u8; 4096];
                let request = loop {
                    let n = stream.read(&mut buf).unwrap_or(0);
                    if n == 0 {
                        break String::from_utf8_lossy(&raw).into_owned();
                    }
                    raw.extend_from_slice(&buf[..n]);
                    let text = String::from_utf8_lossy(&raw).into_owned();
                    if let Some(header_end) = text.find("\r\n\r\n") {
                        let content_length = text
                            .lines()
                            .find_map(|l| l.to_lowercase().strip_prefix("content-length:").map(str::trim).map(String::from))
                            .and_then(|v| v.parse::<usize>().ok())
                            .unwrap_or(0);
                        if raw.len() >= header_end + 4 + content_length {
                            break text;
                        }
                    }
                };
                seen.lock().unwrap().push(request);
                let reason = match status {
                    200 => "OK",
                    401 => "Unauthorized",
                    429 => "Too Many Requests",
                    500 => "Internal Server Error",
                    _ => "Status",
                };
                let mut response = format!("HTTP/1.1 {status} {reason}\r\n");
                for (name, value) in &headers {
                    response.push_str(&format!("{name}: {value}\r\n"));
                }
                response.push_str(&format!(
                    "Content-Length: {}\r\nContent-Type: application/json\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                ));
                let _ = stream.write_all(response.as_bytes());
            }
        });
        ScriptedServer {
            url,
            requests,
            handle: Some(handle),
        }
    }

    fn requests(&self) -> Vec<String> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn completion_body(content: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

fn http_config(url: &str, credential_ref: &str) -> ModelConfig {
    let mut config = ModelConfig::mock();
    config.endpoint_url = url.to_string();
    config.model_id = "test-model".to_string();
    config.credential_ref = credential_ref.to_string();
    config.max_retries = 3;
    config.retry_base_delay_ms = 1;
    config.parallelism = 1;
    config
}

fn one_prompt() -> PromptRecord {
    PromptRecord {
        context_index: 1,
        value_id: 1,
        variant_id: 1,
        text: "rate the value".to_string(),
        option_map: valign_core::catalog::OptionScheme::five_point().option_map(),
    }
}

#[test]
fn http_backend_sends_openai_shape_and_parses_the_answer() {
    let server = ScriptedServer::start(vec![(
        200,
        vec![],
        completion_body("{\"score\": -1}"),
    )]);
    std::env::set_var("VALIGN_TEST_KEY_OK", "sk-test-123");
    let config = http_config(&server.url, "VALIGN_TEST_KEY_OK");
    let backend = HttpBackend::from_env(&config).unwrap();
    let summary =
        run_evaluation(&backend, &config, &[one_prompt()], &EvalOptions::default()).unwrap();
    assert_eq!(summary.records[0].raw_score, ScoreOutcome::Numeric(valign_core::catalog::RawScore::new(-1).unwrap()));

    let requests = server.requests();
    assert_eq!(requests.len(), 1);
    let request = &requests[0];
    assert!(request.starts_with("POST /chat/completions HTTP/1.1"));
    assert!(request.contains("authorization: Bearer sk-test-123")
        || request.contains("Authorization: Bearer sk-test-123"));
    let body = &request[request.find("\r\n\r\n").unwrap() + 4..];
    let json: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(json["model"], "test-model");
    assert_eq!(json["temperature"], 0.2);
    assert_eq!(json["messages"][0]["role"], "user");
    assert_eq!(json["messages"][0]["content"], "rate the value");
}

#[test]
fn http_backend_retries_transient_errors_and_rate_limits() {
    let server = ScriptedServer::start(vec![
        (500, vec![], "{}".to_string()),
        (
            429,
            vec![("Retry-After".to_string(), "0".to_string())],
            "{}".to_string(),
        ),
        (200, vec![], completion_body("{\"score\": 2}")),
    ]);
    std::env::set_var("VALIGN_TEST_KEY_RETRY", "sk-test");
    let config = http_config(&server.url, "VALIGN_TEST_KEY_RETRY");
    let backend = HttpBackend::from_env(&config).unwrap();
    let summary =
        run_evaluation(&backend, &config, &[one_prompt()], &EvalOptions::default()).unwrap();
    assert_eq!(summary.missing, 0);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn http_backend_exhausts_retries_into_a_missing_record() {
    let server = ScriptedServer::start(vec![
        (500, vec![], "{}".to_string()),
        (500, vec![], "{}".to_string()),
    ]);
    std::env::set_var("VALIGN_TEST_KEY_DOWN", "sk-test");
    let mut config = http_config(&server.url, "VALIGN_TEST_KEY_DOWN");
    config.max_retries = 1;
    let backend = HttpBackend::from_env(&config).unwrap();
    let summary =
        run_evaluation(&backend, &config, &[one_prompt()], &EvalOptions::default()).unwrap();
    assert_eq!(summary.missing, 1);
    let record = &summary.records[0];
    assert_eq!(record.raw_score, ScoreOutcome::Missing);
    assert!(record.transport_error.as_deref().unwrap().contains("500"));
    assert!(summary.degraded);
}

#[test]
fn http_backend_treats_401_as_fatal_auth_error() {
    let server = ScriptedServer::start(vec![(401, vec![], "{}".to_string())]);
    std::env::set_var("VALIGN_TEST_KEY_BAD", "sk-wrong");
    let config = http_config(&server.url, "VALIGN_TEST_KEY_BAD");
    let backend = HttpBackend::from_env(&config).unwrap();
    let err = run_evaluation(&backend, &config, &[one_prompt()], &EvalOptions::default())
        .unwrap_err();
    assert!(matches!(err, GatewayError::Auth(_)));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn missing_credential_is_detected_before_any_request() {
    let config = http_config("http://127.0.0.1:9", "VALIGN_TEST_KEY_UNSET_XYZ");
    match HttpBackend::from_env(&config) {
        Err(GatewayError::MissingCredential(var)) => {
            assert_eq!(var, "VALIGN_TEST_KEY_UNSET_XYZ")
        }
        Err(other) => panic!("expected missing-credential error, got {other:?}"),
        Ok(_) => panic!("expected missing-credential error, got a backend"),
    }
}

#[test]
fn stability_probe_reports_per_cell_variance() {
    let batch: Vec<PromptRecord> = full_batch().into_iter().take(40).collect();
    let backend = MockBackend::new(11);
    let report =
        valign_core::gateway::run_stability(&backend, &ModelConfig::mock(), &batch, 10).unwrap();
    assert_eq!(report.replicates, 10);
    assert_eq!(report.cells.len(), 40);
    for cell in &report.cells {
        assert_eq!(cell.numeric, 10);
        assert!(cell.variance.unwrap() >= 0.0);
    }
    assert!(report.max_variance.unwrap() <= 0.25);
    assert!(report.stable_fraction.is_some());
    // deterministic across repeats
    let backend = MockBackend::new(11);
    let again =
        valign_core::gateway::run_stability(&backend, &ModelConfig::mock(), &batch, 10).unwrap();
    assert_eq!(
        serde_json::to_string(&report.cells).unwrap(),
        serde_json::to_string(&again.cells).unwrap()
    );
}
