//! The chat client against a local server that replays recorded exchanges.

mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::Value;
use synthline::engine::http::ChatRequest;
use synthline::engine::{
    run_generation, Backoff, ChatBackend, CompletionBackend, GenerationParams, RunOptions, RunStatus,
};
use synthline::store::VecSink;
use synthline_core::resources::{defect_labels, synthline_model};

const REQUEST: &str = include_str!("fixtures/chat_request.json");
const RESPONSE: &str = include_str!("fixtures/chat_response.json");
const PROMPT: &str = include_str!("../../core/tests/fixtures/prompt_ambiguous_functions_healthcare.txt");

#[derive(Default)]
struct Recorder {
    bodies: Mutex<Vec<Value>>,
    auth: Mutex<Vec<Option<String>>>,
    /// Responses to give before answering normally.
    script: Mutex<Vec<StatusCode>>,
    calls: AtomicUsize,
}

async fn completions(State(r): State<Arc<Recorder>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, String) {
    r.calls.fetch_add(1, Ordering::SeqCst);
    r.bodies.lock().unwrap().push(body);
    r.auth
        .lock()
        .unwrap()
        .push(headers.get("authorization").map(|v| v.to_str().unwrap().to_string()));
    let scripted = {
        let mut s = r.script.lock().unwrap();
        (!s.is_empty()).then(|| s.remove(0))
    };
    match scripted {
        Some(code) => (code, r#"{"error":{"message":"scripted"}}"#.into()),
        None => (StatusCode::OK, RESPONSE.into()),
    }
}

async fn server(script: Vec<StatusCode>) -> (String, Arc<Recorder>) {
    let rec = Arc::new(Recorder { script: Mutex::new(script), ..Default::default() });
    let app = Router::new()
        .route("/v1/chat/completions", post(completions))
        .with_state(rec.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1"), rec)
}

fn gpt4o() -> GenerationParams {
    GenerationParams { model_name: "gpt-4o".into(), ..GenerationParams::default() }
}

#[tokio::test]
async fn request_and_response_match_recording() {
    let (base, rec) = server(vec![]).await;
    let backend = ChatBackend::new(&base).with_api_key(Some("sk-test".into()));
    let text = backend.complete(PROMPT, &gpt4o()).await.unwrap();
    assert_eq!(text, "When a patient record is updated, the system shall notify the relevant staff in a timely manner.");
    let expected: Value = serde_json::from_str(REQUEST).unwrap();
    assert_eq!(rec.bodies.lock().unwrap()[0], expected);
    assert_eq!(rec.auth.lock().unwrap()[0].as_deref(), Some("Bearer sk-test"));
    assert_eq!(serde_json::to_value(ChatRequest::new(PROMPT, &gpt4o(), None)).unwrap(), expected);
}

#[tokio::test]
async fn system_message_is_opt_in() {
    let (base, rec) = server(vec![]).await;
    let backend = ChatBackend::new(&base).with_api_key(None).with_system(Some("You write requirements.".into()));
    backend.complete("hi", &gpt4o()).await.unwrap();
    let body = rec.bodies.lock().unwrap()[0].clone();
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert_eq!(rec.auth.lock().unwrap()[0], None);
}

#[tokio::test]
async fn rate_limits_and_server_errors_are_retried() {
    let (base, rec) = server(vec![StatusCode::TOO_MANY_REQUESTS, StatusCode::SERVICE_UNAVAILABLE]).await;
    let backend: Arc<dyn CompletionBackend> = Arc::new(ChatBackend::new(&base).with_api_key(None));
    let mut config = common::single_atomic(1);
    config = config.with_values("Temperature", vec![synthline_core::AttrValue::Number(0.7)]);
    let mut sink = VecSink::default();
    let opts = RunOptions {
        seed: Some(3),
        backoff: Backoff { base: Duration::from_millis(1), ..Backoff::default() },
        template: None,
    };
    let params = GenerationParams { retry_limit: 3, ..GenerationParams::from_configuration(&synthline_model(), &config) };
    let run = run_generation(&synthline_model(), &config, &defect_labels()[0], params, backend, &mut sink, opts)
        .await
        .unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(rec.calls.load(Ordering::SeqCst), 3);
    assert_eq!(run.failures.len(), 2);
    assert_eq!(rec.bodies.lock().unwrap()[2]["temperature"], 0.7);
    assert_eq!(sink.0[0].temperature, Some(0.7));
}

#[tokio::test]
async fn unauthorized_is_permanent() {
    let (base, rec) = server(vec![StatusCode::UNAUTHORIZED; 10]).await;
    let backend: Arc<dyn CompletionBackend> = Arc::new(ChatBackend::new(&base).with_api_key(Some("bad".into())));
    let mut sink = VecSink::default();
    let run = run_generation(
        &synthline_model(),
        &common::four_atomics(4),
        &defect_labels()[0],
        GenerationParams { max_concurrency: 1, ..GenerationParams::default() },
        backend,
        &mut sink,
        RunOptions::default(),
    )
    .await
    .unwrap();
    assert_eq!(run.status, RunStatus::Failed);
    assert_eq!(rec.calls.load(Ordering::SeqCst), 1);
    assert!(run.error.unwrap().contains("401"));
}

#[tokio::test]
async fn unreachable_server_is_transient() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let backend = ChatBackend::with_timeout(&format!("http://{addr}"), Duration::from_secs(2)).with_api_key(None);
    let err = backend.complete("hi", &gpt4o()).await.unwrap_err();
    assert!(err.is_transient(), "{err}");
}
