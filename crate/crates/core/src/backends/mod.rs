//! Chat-completion backends: a remote HTTP client and a deterministic
//! scripted backend.

mod http;
mod scripted;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::types::TokenUsage;

pub use http::{HttpBackend, HttpBackendConfig};
pub use scripted::{ScriptEntry, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_generated_tokens: u32,
}

impl ChatRequest {
    /// All message contents joined by newlines; what scripted match keys are
    /// searched in.
    pub fn rendered_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: TokenUsage,
    /// Wall time across all attempts. Always zero for scripted backends so
    /// their trajectories stay byte-reproducible.
    pub latency_ms: u64,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request rejected with HTTP {status}: {body}")]
    Rejected { status: u16, body: String },
    /// The endpoint refused the prompt for exceeding the model's context window.
    #[error("context window exceeded: {0}")]
    ContextOverflow(String),
    #[error("response has no usage block")]
    UsageMissing,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("no script entry matches the request")]
    NoMatchingEntry,
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// Capped exponential backoff for transport failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    pub fn delay_for(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).complete(request)
    }
}

fn validate(request: &ChatRequest) -> Result<(), BackendError> {
    if request.messages.is_empty() {
        return Err(BackendError::InvalidRequest(
            "at least one message is required",
        ));
    }
    if request.temperature.is_nan() || request.temperature < 0.0 {
        return Err(BackendError::InvalidRequest(
            "temperature must be non-negative",
        ));
    }
    if request.max_generated_tokens == 0 {
        return Err(BackendError::InvalidRequest(
            "max_generated_tokens must be positive",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy {
            max_retries: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(1000),
        };
        assert_eq!(p.delay_for(0), Duration::from_millis(100));
        assert_eq!(p.delay_for(2), Duration::from_millis(400));
        assert_eq!(p.delay_for(4), Duration::from_millis(1000));
        assert_eq!(p.delay_for(40), Duration::from_millis(1000));
    }

    #[test]
    fn only_transport_retries() {
        assert!(BackendError::Transport("x".into()).is_retriable());
        assert!(!BackendError::Rejected {
            status: 400,
            body: String::new()
        }
        .is_retriable());
        assert!(!BackendError::UsageMissing.is_retriable());
    }
}
