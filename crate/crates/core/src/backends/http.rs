use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{validate, BackendError, ChatBackend, ChatRequest, ChatResponse, RetryPolicy};
use crate::types::TokenUsage;

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    /// Scheme, host and optional prefix; `/v1/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    /// Bearer credential, already resolved from its environment variable.
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retry: RetryPolicy,
    pub seed: Option<u64>,
}

impl HttpBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            timeout: Duration::from_secs(120),
            retry: RetryPolicy::default(),
            seed: None,
        }
    }
}

/// Client for any endpoint speaking the chat-completions JSON protocol.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    config: HttpBackendConfig,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
    prompt_tokens_details: Option<WirePromptDetails>,
}

#[derive(Deserialize)]
struct WirePromptDetails {
    cached_tokens: Option<u64>,
}

fn looks_like_context_overflow(body: &str) -> bool {
    let lower = body.to_lowercase();
    lower.contains("context length")
        || lower.contains("context_length")
        || lower.contains("maximum context")
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let url = format!(
            "{}/v1/chat/completions",
            config.base_url.trim_end_matches('/')
        );
        Self { agent, url, config }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_generated_tokens,
        });
        if let Some(seed) = self.config.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<(String, TokenUsage), BackendError> {
        let mut req = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send(
                serde_json::to_vec(body)
                    .expect("request serializes")
                    .as_slice(),
            )
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        // 429 is a throttle, not a verdict on the request.
        if status >= 500 || status == 429 {
            return Err(BackendError::Transport(format!("HTTP {status}: {text}")));
        }
        if status >= 400 {
            if looks_like_context_overflow(&text) {
                return Err(BackendError::ContextOverflow(text));
            }
            return Err(BackendError::Rejected { status, body: text });
        }
        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let usage = wire.usage.ok_or(BackendError::UsageMissing)?;
        let content = wire
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?
            .message
            .content
            .unwrap_or_default();
        let cached = usage
            .prompt_tokens_details
            .and_then(|d| d.cached_tokens)
            .unwrap_or(0)
            .min(usage.prompt_tokens);
        Ok((
            content,
            TokenUsage::new(usage.prompt_tokens, cached, usage.completion_tokens),
        ))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        validate(request)?;
        let body = self.body(request);
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok((text, usage)) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    tracing::debug!(
                        url = %self.url,
                        attempts,
                        latency_ms,
                        prompt_tokens = usage.prompt_tokens,
                        generated_tokens = usage.generated_tokens,
                        "chat completion"
                    );
                    return Ok(ChatResponse {
                        text,
                        usage,
                        latency_ms,
                        attempts,
                    });
                }
                Err(e) if e.is_retriable() && attempts <= self.config.retry.max_retries => {
                    let delay = self.config.retry.delay_for(attempts - 1);
                    tracing::warn!(url = %self.url, attempts, error = %e, ?delay, "retrying chat completion");
                    std::thread::sleep(delay);
                }
                Err(e) => {
                    tracing::warn!(url = %self.url, attempts, error = %e, "chat completion failed");
                    return Err(e);
                }
            }
        }
    }
}
