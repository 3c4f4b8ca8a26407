use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{validate, BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::context::{message_tokens, whitespace_tokens};
use crate::types::TokenUsage;

/// One canned reply. An entry with a `match` key is only eligible for
/// requests whose rendered text contains that substring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub match_: Option<String>,
    pub response: String,
}

impl ScriptEntry {
    pub fn any(response: impl Into<String>) -> Self {
        Self {
            match_: None,
            response: response.into(),
        }
    }

    pub fn keyed(key: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            match_: Some(key.into()),
            response: response.into(),
        }
    }
}

#[derive(Debug)]
struct State {
    consumed: Vec<bool>,
    requests: Vec<ChatRequest>,
}

/// Replays a fixed script. Usage is synthesized from whitespace token counts:
/// prompt tokens over all message contents, generated tokens over the reply,
/// and no cached tokens.
#[derive(Debug)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    state: Mutex<State>,
}

impl ScriptedBackend {
    /// An empty script is valid and fails every request with
    /// `ScriptExhausted`.
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let n = entries.len();
        Self {
            entries,
            state: Mutex::new(State {
                consumed: vec![false; n],
                requests: Vec::new(),
            }),
        }
    }

    /// Unkeyed script, consumed strictly in order.
    pub fn from_responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(responses.into_iter().map(ScriptEntry::any).collect())
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().unwrap().requests.clone()
    }

    pub fn remaining(&self) -> usize {
        self.state
            .lock()
            .unwrap()
            .consumed
            .iter()
            .filter(|c| !**c)
            .count()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        validate(request)?;
        let mut state = self.state.lock().unwrap();
        state.requests.push(request.clone());
        if state.consumed.iter().all(|c| *c) {
            return Err(BackendError::ScriptExhausted);
        }
        let mut text = None;
        let idx = self
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| {
                !state.consumed[*i]
                    && e.match_.as_deref().is_none_or(|k| {
                        text.get_or_insert_with(|| request.rendered_text())
                            .contains(k)
                    })
            })
            .map(|(i, _)| i)
            .ok_or(BackendError::NoMatchingEntry)?;
        state.consumed[idx] = true;
        let response = self.entries[idx].response.clone();
        let usage = TokenUsage::new(
            message_tokens(&request.messages),
            0,
            whitespace_tokens(&response),
        );
        tracing::debug!(
            entry = idx,
            prompt_tokens = usage.prompt_tokens,
            "scripted completion"
        );
        Ok(ChatResponse {
            text: response,
            usage,
            latency_ms: 0,
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::ChatMessage;

    fn req(text: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::user(text)],
            temperature: 0.0,
            max_generated_tokens: 64,
        }
    }

    #[test]
    fn pass_through_with_synthesized_usage() {
        let b = ScriptedBackend::from_responses(["CONTINUE"]);
        let r = b.complete(&req("check this please")).unwrap();
        assert_eq!(r.text, "CONTINUE");
        assert_eq!(r.usage, TokenUsage::new(3, 0, 1));
    }

    #[test]
    fn keyed_dispatch() {
        let b = ScriptedBackend::new(vec![
            ScriptEntry::keyed("planning-only", "<PLAN>p</PLAN>"),
            ScriptEntry::keyed("verification-only", "CONTINUE"),
        ]);
        let r = b
            .complete(&req("You are a verification-only supervisor."))
            .unwrap();
        assert_eq!(r.text, "CONTINUE");
        assert_eq!(b.remaining(), 1);
    }

    #[test]
    fn fifo_order() {
        let b = ScriptedBackend::from_responses(["one", "two"]);
        assert_eq!(b.complete(&req("x")).unwrap().text, "one");
        assert_eq!(b.complete(&req("x")).unwrap().text, "two");
    }

    #[test]
    fn exhausted_and_unmatched() {
        let b = ScriptedBackend::new(vec![
            ScriptEntry::keyed("alpha", "a"),
            ScriptEntry::any("b"),
        ]);
        assert_eq!(b.complete(&req("beta")).unwrap().text, "b");
        assert_eq!(b.complete(&req("beta")), Err(BackendError::NoMatchingEntry));
        assert_eq!(b.complete(&req("alpha")).unwrap().text, "a");
        assert_eq!(
            b.complete(&req("alpha")),
            Err(BackendError::ScriptExhausted)
        );
    }

    #[test]
    fn usage_counts_messages_separately() {
        let b = ScriptedBackend::from_responses(["ok"]);
        let r = b
            .complete(&ChatRequest {
                messages: vec![ChatMessage::user("a b"), ChatMessage::user("c")],
                temperature: 0.0,
                max_generated_tokens: 8,
            })
            .unwrap();
        assert_eq!(r.usage.prompt_tokens, 3);
    }

    #[test]
    fn empty_request_rejected() {
        let b = ScriptedBackend::from_responses(["ok"]);
        let bad = ChatRequest {
            messages: vec![],
            temperature: 0.0,
            max_generated_tokens: 8,
        };
        assert!(matches!(
            b.complete(&bad),
            Err(BackendError::InvalidRequest(_))
        ));
        assert_eq!(b.remaining(), 1);
    }
}
