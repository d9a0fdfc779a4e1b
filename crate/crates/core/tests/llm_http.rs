//! Chat-completion client against a local stub server.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use stn_insight::llm::{Completer, LlmClient, LlmConfig, LlmError};
use stn_insight::prompt::{Attachment, PromptTask, RenderedPrompt};

/// Serves `handler` on a random loopback port; returns the endpoint URL.
fn serve<F>(handler: F) -> (String, Arc<Mutex<Vec<Value>>>)
where
    F: Fn(usize, &Value) -> (u16, String) + Send + 'static,
{
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", server.server_addr());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        let count = AtomicUsize::new(0);
        for mut request in server.incoming_requests() {
            let mut body = String::new();
            request.as_reader().read_to_string(&mut body).unwrap();
            let value: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
            log.lock().unwrap().push(value.clone());
            let (status, text) = handler(count.fetch_add(1, Ordering::SeqCst), &value);
            let response = tiny_http::Response::from_string(text).with_status_code(status);
            let _ = request.respond(response);
        }
    });
    (url, seen)
}

fn envelope(content: &str) -> String {
    json!({"model": "stub", "choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn config(url: &str) -> LlmConfig {
    LlmConfig {
        endpoint_url: url.to_string(),
        model_id: "stub-model".into(),
        api_key_env: None,
        retries: 2,
        backoff_ms: 5,
        timeout_secs: 10.0,
        ..LlmConfig::default()
    }
}

fn prompt() -> RenderedPrompt {
    RenderedPrompt {
        task: PromptTask::C1,
        text: "Generate a plot.\n  keep   spacing ".into(),
        attachments: vec![Attachment {
            name: "features.csv".into(),
            content: "algorithm,best_performance,average_performance\na,1,2\n".into(),
        }],
    }
}

#[test]
fn echo_returns_wire_text() {
    let (url, seen) = serve(|_, body| {
        let content = body["messages"][0]["content"].as_str().unwrap().to_string();
        (200, envelope(&content))
    });
    let client = LlmClient::new(config(&url)).unwrap();
    let p = prompt();
    let reply = client.complete(&p).unwrap();
    assert_eq!(reply.text, p.wire_text());
    let sent = seen.lock().unwrap()[0].clone();
    assert_eq!(sent["messages"][0]["role"], "user");
    assert_eq!(sent["messages"][0]["content"].as_str().unwrap(), p.wire_text());
    assert_eq!(sent["model"], "stub-model");
    assert_eq!(sent["temperature"], 0.0);
    assert!(sent["messages"][0]["content"].as_str().unwrap().contains("```csv\n"));
}

#[test]
fn unauthorized_is_fatal() {
    let (url, seen) = serve(|_, _| (401, "{\"error\":\"bad key\"}".into()));
    let client = LlmClient::new(config(&url)).unwrap();
    let err = client.complete(&prompt()).unwrap_err();
    assert!(matches!(err, LlmError::Auth(401)));
    assert!(err.is_fatal());
    assert_eq!(seen.lock().unwrap().len(), 1);
    assert_eq!(client.request_log().len(), 1);
}

#[test]
fn rate_limit_then_success() {
    let (url, seen) = serve(|n, _| {
        if n == 0 {
            (429, "slow down".into())
        } else {
            (200, envelope("[winner=algo_2]"))
        }
    });
    let client = LlmClient::new(config(&url)).unwrap();
    let reply = client.complete(&prompt()).unwrap();
    assert_eq!(reply.text, "[winner=algo_2]");
    assert_eq!(seen.lock().unwrap().len(), 2);
    let log = client.request_log();
    assert_eq!(log.iter().map(|a| a.status).collect::<Vec<_>>(), [Some(429), Some(200)]);
}

#[test]
fn attempts_are_bounded() {
    let (url, seen) = serve(|_, _| (503, "busy".into()));
    let client = LlmClient::new(config(&url)).unwrap();
    let err = client.complete(&prompt()).unwrap_err();
    assert!(matches!(err, LlmError::Http { status: 503, .. }));
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn malformed_envelope_is_fatal() {
    let (url, seen) = serve(|_, _| (200, "{\"unexpected\": true}".into()));
    let client = LlmClient::new(config(&url)).unwrap();
    assert!(matches!(client.complete(&prompt()), Err(LlmError::Envelope(_))));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn network_failure_retries() {
    // Bind and drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = LlmClient::new(config(&format!("http://127.0.0.1:{port}/v1"))).unwrap();
    let err = client.complete(&prompt()).unwrap_err();
    assert!(matches!(err, LlmError::Network { attempts: 3, .. }));
    assert!(!err.is_fatal());
    assert_eq!(client.request_log().len(), 3);
}

#[test]
fn missing_key_for_remote_endpoint() {
    let cfg = LlmConfig {
        endpoint_url: "https://example.invalid/v1/chat/completions".into(),
        api_key_env: Some("STN_INSIGHT_TEST_KEY_THAT_IS_NOT_SET".into()),
        ..LlmConfig::default()
    };
    let client = LlmClient::new(cfg).unwrap();
    assert!(matches!(client.complete(&prompt()), Err(LlmError::MissingKey(_))));
}
