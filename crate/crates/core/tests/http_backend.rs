use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use hymas_core::backends::{
    BackendError, ChatBackend, ChatMessage, ChatRequest, HttpBackend, HttpBackendConfig,
    RetryPolicy,
};

/// Serves one canned `(status, body)` per connection and records request
/// bodies.
fn serve(responses: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let request = read_request(&stream);
            log.lock().unwrap().push(request);
            respond(stream, status, &body);
        }
    });
    (addr, seen)
}

fn read_request(stream: &TcpStream) -> String {
    let mut reader = BufReader::new(stream);
    let mut length = 0usize;
    let mut headers = String::new();
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            length = v.trim().parse().unwrap();
        }
        headers.push_str(&line);
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).unwrap();
    format!("{headers}\r\n{}", String::from_utf8(body).unwrap())
}

fn respond(mut stream: TcpStream, status: u16, body: &str) {
    let reason = if status == 200 { "OK" } else { "Error" };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    stream.flush().unwrap();
}

fn backend(addr: &str) -> HttpBackend {
    let mut cfg = HttpBackendConfig::new(addr, "test-model");
    cfg.api_key = Some("secret".into());
    cfg.timeout = Duration::from_secs(5);
    cfg.retry = RetryPolicy {
        max_retries: 3,
        base_delay: Duration::from_millis(5),
        max_delay: Duration::from_millis(20),
    };
    HttpBackend::new(cfg)
}

fn request() -> ChatRequest {
    ChatRequest {
        messages: vec![ChatMessage::user("hello there")],
        temperature: 0.0,
        max_generated_tokens: 64,
    }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"search[Paris]"}}],
"usage":{"prompt_tokens":120,"completion_tokens":7,"prompt_tokens_details":{"cached_tokens":64}}}"#;

#[test]
fn retries_transient_failures() {
    let (addr, seen) = serve(vec![
        (503, "{}".into()),
        (503, "{}".into()),
        (200, OK.into()),
    ]);
    let resp = backend(&addr).complete(&request()).unwrap();
    assert_eq!(resp.attempts, 3);
    assert_eq!(resp.text, "search[Paris]");
    assert_eq!(resp.usage.prompt_tokens, 120);
    assert_eq!(resp.usage.cached_tokens, 64);
    assert_eq!(resp.usage.generated_tokens, 7);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen[0].starts_with("POST /v1/chat/completions"));
    assert!(seen[0]
        .to_ascii_lowercase()
        .contains("authorization: bearer secret"));
    let body: serde_json::Value =
        serde_json::from_str(seen[0].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["content"], "hello there");
    assert_eq!(body["max_tokens"], 64);
}

#[test]
fn gives_up_after_retry_budget() {
    let (addr, _) = serve(vec![(500, "{}".into()); 4]);
    let err = backend(&addr).complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)));
}

#[test]
fn client_errors_are_not_retried() {
    let (addr, seen) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let err = backend(&addr).complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::Rejected { status: 401, .. }));
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn context_overflow_is_classified() {
    let (addr, _) = serve(vec![(
        400,
        r#"{"error":{"message":"This model's maximum context length is 8192 tokens"}}"#.into(),
    )]);
    let err = backend(&addr).complete(&request()).unwrap_err();
    assert!(matches!(err, BackendError::ContextOverflow(_)));
}

#[test]
fn missing_usage_is_an_error() {
    let (addr, _) = serve(vec![(
        200,
        r#"{"choices":[{"message":{"content":"hi"}}]}"#.into(),
    )]);
    let err = backend(&addr).complete(&request()).unwrap_err();
    assert_eq!(err, BackendError::UsageMissing);
}
