//! The executor's growing ReAct context with append and reset semantics.

use crate::backends::{ChatMessage, Role};
use crate::types::TurnRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("context of {token_len} tokens exceeds cap of {cap}")]
    OutOfContext { token_len: u64, cap: u64 },
    #[error("reported context length regressed from {from} to {to} tokens")]
    Regressed { from: u64, to: u64 },
}

/// Whitespace-delimited token count, used wherever a length is needed before
/// a backend has reported one. For subword tokenizers this never exceeds the
/// true count.
pub fn whitespace_tokens(text: &str) -> u64 {
    if !text.is_ascii() {
        return text.split_whitespace().count() as u64;
    }
    // Byte scan agreeing with `char::is_whitespace` on ASCII input.
    let mut count = 0;
    let mut in_word = false;
    for &b in text.as_bytes() {
        let ws = matches!(b, b' ' | b'\t' | b'\n' | b'\x0B' | b'\x0C' | b'\r');
        if !ws && !in_word {
            count += 1;
        }
        in_word = !ws;
    }
    count
}

/// Token count of a message list, counting each message's content separately.
pub fn message_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| whitespace_tokens(&m.content)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorContext {
    seed_prompt: String,
    turns: Vec<TurnRecord>,
    token_len: u64,
    cap: u64,
}

impl ExecutorContext {
    /// A fresh context holding only `seed_prompt`.
    pub fn new(
        seed_prompt: impl Into<String>,
        seed_token_len: u64,
        cap: u64,
    ) -> Result<Self, ContextError> {
        if seed_token_len > cap {
            return Err(ContextError::OutOfContext {
                token_len: seed_token_len,
                cap,
            });
        }
        Ok(Self {
            seed_prompt: seed_prompt.into(),
            turns: Vec::new(),
            token_len: seed_token_len,
            cap,
        })
    }

    pub fn seed_prompt(&self) -> &str {
        &self.seed_prompt
    }

    pub fn turns(&self) -> &[TurnRecord] {
        &self.turns
    }

    pub fn token_len(&self) -> u64 {
        self.token_len
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn fits(&self, token_len: u64) -> bool {
        token_len <= self.cap
    }

    /// Appends `turn`, whose call left `new_token_len` tokens in context.
    ///
    /// On overflow the context is consumed and `OutOfContext` returned; the
    /// trajectory cannot continue.
    pub fn append_turn(
        mut self,
        turn: TurnRecord,
        new_token_len: u64,
    ) -> Result<Self, ContextError> {
        if new_token_len < self.token_len {
            return Err(ContextError::Regressed {
                from: self.token_len,
                to: new_token_len,
            });
        }
        if new_token_len > self.cap {
            return Err(ContextError::OutOfContext {
                token_len: new_token_len,
                cap: self.cap,
            });
        }
        debug_assert!(self.turns.last().is_none_or(|last| last.t < turn.t));
        self.turns.push(turn);
        self.token_len = new_token_len;
        Ok(self)
    }

    /// Drops all turns and replaces the seed prompt.
    pub fn reset_context(
        mut self,
        new_seed: impl Into<String>,
        seed_token_len: u64,
    ) -> Result<Self, ContextError> {
        if seed_token_len > self.cap {
            return Err(ContextError::OutOfContext {
                token_len: seed_token_len,
                cap: self.cap,
            });
        }
        self.seed_prompt = new_seed.into();
        self.turns.clear();
        self.token_len = seed_token_len;
        Ok(self)
    }

    /// The chat transcript sent to the executor for its next turn.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(1 + 2 * self.turns.len());
        out.push(ChatMessage::new(Role::User, self.seed_prompt.clone()));
        for turn in &self.turns {
            out.push(ChatMessage::new(Role::Assistant, turn.assistant_text()));
            if let Some(obs) = &turn.observation {
                out.push(ChatMessage::new(Role::User, format!("Observation: {obs}")));
            }
        }
        out
    }
}
