use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Environment, Observation, WIKI_TOOLS};
use crate::prompting::WIKIENV_TOOL_PROMPT;
use crate::types::ToolCall;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEnvEntry {
    pub tool: String,
    pub argument: String,
    pub observation: String,
}

/// File form of a scripted environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedEnvSpec {
    #[serde(default)]
    pub tools: Option<Vec<String>>,
    #[serde(default)]
    pub entries: Vec<ScriptedEnvEntry>,
    pub default: String,
}

/// Lookup-table environment. `finish` is always terminal; any call not in
/// the table gets the default observation.
#[derive(Debug, Clone)]
pub struct ScriptedEnv {
    table: HashMap<ToolCall, String>,
    default: String,
    tools: Vec<String>,
    tool_prompt: String,
}

impl ScriptedEnv {
    pub fn new(table: HashMap<ToolCall, String>, default: impl Into<String>) -> Self {
        Self {
            table,
            default: default.into(),
            tools: WIKI_TOOLS.iter().map(|s| s.to_string()).collect(),
            tool_prompt: WIKIENV_TOOL_PROMPT.to_string(),
        }
    }

    pub fn from_spec(spec: &ScriptedEnvSpec) -> Self {
        let table = spec
            .entries
            .iter()
            .map(|e| (ToolCall::new(&e.tool, &e.argument), e.observation.clone()))
            .collect();
        let mut env = Self::new(table, spec.default.clone());
        if let Some(tools) = &spec.tools {
            env.tools = tools.clone();
        }
        env
    }

    pub fn with_tools(mut self, tools: Vec<String>, tool_prompt: impl Into<String>) -> Self {
        self.tools = tools;
        self.tool_prompt = tool_prompt.into();
        self
    }
}

impl Environment for ScriptedEnv {
    fn tool_names(&self) -> Vec<String> {
        self.tools.clone()
    }

    fn tool_prompt(&self) -> String {
        self.tool_prompt.clone()
    }

    fn reset(&mut self) {}

    fn step(&mut self, call: &ToolCall) -> Observation {
        if call.tool == "finish" {
            return Observation::finish(&call.argument);
        }
        Observation::text(self.table.get(call).unwrap_or(&self.default).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> ScriptedEnv {
        ScriptedEnv::new(
            HashMap::from([(ToolCall::new("search", "A"), "obs".to_string())]),
            "nothing",
        )
    }

    #[test]
    fn table_lookup() {
        assert_eq!(env().step(&ToolCall::new("search", "A")).text, "obs");
    }

    #[test]
    fn unscripted_gets_default() {
        let o = env().step(&ToolCall::new("lookup", "B"));
        assert_eq!(o.text, "nothing");
        assert!(!o.terminal);
    }

    #[test]
    fn finish_is_terminal() {
        let o = env().step(&ToolCall::new("finish", "42"));
        assert!(o.terminal);
        assert_eq!(o.final_answer.as_deref(), Some("42"));
    }
}
