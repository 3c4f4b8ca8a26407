//! Tool environments the executor acts in, plus the QA task loader.

mod scripted;
mod tasks;
mod wiki;

use serde::{Deserialize, Serialize};

use crate::types::ToolCall;

pub use scripted::{ScriptedEnv, ScriptedEnvEntry, ScriptedEnvSpec};
pub use tasks::{load_tasks, TaskLoadError};
pub use wiki::{
    normalize_title, split_sentences, wiki_lookup, wiki_search, CorpusError, WikiCorpus, WikiEnv,
    WikiPage, WikiSession, DEFAULT_OBSERVATION_BUDGET, NO_MORE_RESULTS, NO_PAGE_LOADED, WIKI_TOOLS,
};

/// What the environment returns for one tool call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub terminal: bool,
    pub final_answer: Option<String>,
}

impl Observation {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            terminal: false,
            final_answer: None,
        }
    }

    pub fn finish(answer: &str) -> Self {
        Self {
            text: format!("Episode finished. Answer: {answer}"),
            terminal: true,
            final_answer: Some(answer.to_string()),
        }
    }

    pub fn invalid_tool<S: AsRef<str>>(tools: &[S]) -> Self {
        let names: Vec<&str> = tools.iter().map(AsRef::as_ref).collect();
        Self::text(format!(
            "Invalid tool. Available tools: {}.",
            names.join(", ")
        ))
    }
}

/// A tool environment bound to one trajectory.
///
/// Failures are reported as observations, never as errors: the agent must
/// see them.
pub trait Environment: Send {
    /// Names accepted by the tool-call parser.
    fn tool_names(&self) -> Vec<String>;
    /// Tool description bound as `available_tools` in every prompt.
    fn tool_prompt(&self) -> String;
    fn reset(&mut self);
    fn step(&mut self, call: &ToolCall) -> Observation;
}
