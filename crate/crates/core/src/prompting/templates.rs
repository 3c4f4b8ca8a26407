use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    /// Supervisor: initial tool-use plan.
    Plan,
    /// Executor: no plan; monolithic and EVA start.
    DirectExec,
    /// Executor: follow the supervisor plan.
    PlanExec,
    /// Executor: resume from summary + advice after an EVA intervention.
    AdviceResume,
    /// Executor: resume from replan + memory after a PEVR intervention.
    ReplanResume,
    /// Supervisor: plan adherence check with optional replan.
    VerifyReplan,
    /// Supervisor: query progress check with optional summary + advice.
    VerifyAdvice,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::Plan,
        TemplateId::DirectExec,
        TemplateId::PlanExec,
        TemplateId::AdviceResume,
        TemplateId::ReplanResume,
        TemplateId::VerifyReplan,
        TemplateId::VerifyAdvice,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Plan => "plan",
            TemplateId::DirectExec => "direct_exec",
            TemplateId::PlanExec => "plan_exec",
            TemplateId::AdviceResume => "advice_resume",
            TemplateId::ReplanResume => "replan_resume",
            TemplateId::VerifyReplan => "verify_replan",
            TemplateId::VerifyAdvice => "verify_advice",
        }
    }

    /// The stored template text, byte for byte.
    pub fn body(self) -> &'static str {
        match self {
            TemplateId::Plan => include_str!("../../templates/plan.txt"),
            TemplateId::DirectExec => include_str!("../../templates/direct_exec.txt"),
            TemplateId::PlanExec => include_str!("../../templates/plan_exec.txt"),
            TemplateId::AdviceResume => include_str!("../../templates/advice_resume.txt"),
            TemplateId::ReplanResume => include_str!("../../templates/replan_resume.txt"),
            TemplateId::VerifyReplan => include_str!("../../templates/verify_replan.txt"),
            TemplateId::VerifyAdvice => include_str!("../../templates/verify_advice.txt"),
        }
    }

    /// Placeholder names occurring in the body.
    pub fn placeholders(self) -> BTreeSet<&'static str> {
        self.pieces()
            .iter()
            .filter_map(|p| match p {
                Piece::Slot(name) => Some(*name),
                Piece::Text(_) => None,
            })
            .collect()
    }

    /// The body split into literal text and placeholder slots, parsed once.
    fn pieces(self) -> &'static [Piece] {
        static PARSED: OnceLock<Vec<Vec<Piece>>> = OnceLock::new();
        let all = PARSED.get_or_init(|| {
            TemplateId::ALL
                .iter()
                .map(|t| {
                    let body = t.body();
                    let mut pieces = Vec::new();
                    let mut last = 0;
                    for caps in placeholder_re().captures_iter(body) {
                        let span = caps.get(0).unwrap();
                        pieces.push(Piece::Text(&body[last..span.start()]));
                        pieces.push(Piece::Slot(caps.get(1).unwrap().as_str()));
                        last = span.end();
                    }
                    pieces.push(Piece::Text(&body[last..]));
                    pieces
                })
                .collect()
        });
        let idx = TemplateId::ALL.iter().position(|t| *t == self).unwrap();
        &all[idx]
    }
}

enum Piece {
    Text(&'static str),
    Slot(&'static str),
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| RenderError::UnknownTemplate(s.to_string()))
    }
}

/// The Wikipedia environment's tool description, bound as `available_tools`.
pub const WIKIENV_TOOL_PROMPT: &str = include_str!("../../templates/wikienv_tools.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("template {template} has no binding for placeholder '{name}'")]
    MissingBinding { template: TemplateId, name: String },
    #[error("template {template} has no placeholder '{name}'")]
    UnexpectedBinding { template: TemplateId, name: String },
}

pub(crate) fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([a-z_]+)\s*\}\}").unwrap())
}

/// Substitutes every `{{ name }}` span of the template with its binding.
///
/// Bound text is inserted verbatim and never rescanned, so bindings that
/// themselves contain braces survive unchanged.
pub fn render(
    template: TemplateId,
    bindings: &BTreeMap<&str, &str>,
) -> Result<String, RenderError> {
    let names = template.placeholders();
    if let Some(name) = names.iter().find(|n| !bindings.contains_key(*n)) {
        return Err(RenderError::MissingBinding {
            template,
            name: name.to_string(),
        });
    }
    if let Some(name) = bindings.keys().find(|k| !names.contains(*k)) {
        return Err(RenderError::UnexpectedBinding {
            template,
            name: name.to_string(),
        });
    }

    let mut out = String::with_capacity(
        template.body().len() + bindings.values().map(|v| v.len()).sum::<usize>(),
    );
    for piece in template.pieces() {
        match piece {
            Piece::Text(text) => out.push_str(text),
            Piece::Slot(name) => out.push_str(bindings[name]),
        }
    }
    Ok(out)
}

/// `render` addressed by template name.
pub fn render_named(name: &str, bindings: &BTreeMap<&str, &str>) -> Result<String, RenderError> {
    render(name.parse()?, bindings)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn placeholder_sets_match_listings() {
        let names = |t: TemplateId| t.placeholders().into_iter().collect::<Vec<_>>();
        assert_eq!(names(TemplateId::Plan), ["available_tools", "user_query"]);
        assert_eq!(
            names(TemplateId::DirectExec),
            ["available_tools", "user_query"]
        );
        assert_eq!(
            names(TemplateId::PlanExec),
            ["available_tools", "plan", "user_query"]
        );
        assert_eq!(
            names(TemplateId::AdviceResume),
            ["advice", "available_tools", "summary", "user_query"]
        );
        assert_eq!(
            names(TemplateId::ReplanResume),
            ["available_tools", "memory", "replan", "user_query"]
        );
        assert_eq!(
            names(TemplateId::VerifyReplan),
            ["executor_context", "memory", "plan"]
        );
        assert_eq!(
            names(TemplateId::VerifyAdvice),
            ["executor_context", "memory", "user_query"]
        );
    }

    #[test]
    fn render_plan_substitutes_query() {
        let text = render(
            TemplateId::Plan,
            &bind(&[("user_query", "Q"), ("available_tools", "T")]),
        )
        .unwrap();
        assert!(text.contains("- User query:\nQ\n"));
        assert!(text.contains("<TOOLS>\nT\n</TOOLS>"));
        assert!(!text.contains("{{"));
    }

    #[test]
    fn render_reports_missing_binding() {
        let err = render(TemplateId::Plan, &bind(&[("user_query", "Q")])).unwrap_err();
        assert_eq!(
            err,
            RenderError::MissingBinding {
                template: TemplateId::Plan,
                name: "available_tools".into()
            }
        );
    }

    #[test]
    fn render_rejects_extra_binding() {
        let err = render(
            TemplateId::Plan,
            &bind(&[("user_query", "Q"), ("available_tools", "T"), ("plan", "P")]),
        )
        .unwrap_err();
        assert!(matches!(err, RenderError::UnexpectedBinding { .. }));
    }

    #[test]
    fn verify_advice_keeps_intervene_line() {
        let text = render(
            TemplateId::VerifyAdvice,
            &bind(&[
                ("user_query", "q"),
                ("executor_context", "c"),
                ("memory", "m"),
            ]),
        )
        .unwrap();
        assert!(text.lines().any(|l| l == "INTERVENE"));
    }

    #[test]
    fn bindings_are_not_rescanned() {
        let text = render(
            TemplateId::Plan,
            &bind(&[
                ("user_query", "{{ available_tools }}"),
                ("available_tools", "T"),
            ]),
        )
        .unwrap();
        assert!(text.contains("- User query:\n{{ available_tools }}\n"));
    }

    #[test]
    fn unknown_template_name() {
        assert_eq!(
            render_named("nope", &BTreeMap::new()).unwrap_err(),
            RenderError::UnknownTemplate("nope".into())
        );
    }

    #[test]
    fn tool_prompt_describes_three_tools() {
        for tool in ["search[entity]", "lookup[string]", "finish[answer]"] {
            assert!(WIKIENV_TOOL_PROMPT.contains(tool));
        }
    }
}
