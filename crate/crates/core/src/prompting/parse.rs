use crate::types::{Handoff, Plan, PlanOrigin, ToolCall, TurnRecord, VerifierDecision};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed plan: {0}")]
    MalformedPlan(&'static str),
    #[error("malformed verdict: {0}")]
    MalformedVerdict(&'static str),
    #[error("no tool call found")]
    NoToolCall,
}

/// Content between the first `<TAG>` and the next `</TAG>`, trimmed.
/// `None` if either tag is missing.
fn tagged_block<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let end = text[start..].find(&close)? + start;
    Some(text[start..end].trim())
}

fn nonempty_block<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    tagged_block(text, tag).filter(|s| !s.is_empty())
}

pub fn parse_plan(text: &str) -> Result<Plan, ParseError> {
    let body =
        tagged_block(text, "PLAN").ok_or(ParseError::MalformedPlan("missing <PLAN> block"))?;
    if body.is_empty() {
        return Err(ParseError::MalformedPlan("empty plan"));
    }
    Ok(Plan {
        text: body.to_string(),
        origin: PlanOrigin::Initial,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lead {
    Continue,
    Intervene,
}

/// Reads the leading verdict keyword. Keywords are case-sensitive and must be
/// followed by whitespace, a tag, or end of text.
fn leading_keyword(text: &str) -> Option<Lead> {
    let trimmed = text.trim_start();
    for (kw, lead) in [("CONTINUE", Lead::Continue), ("INTERVENE", Lead::Intervene)] {
        if let Some(rest) = trimmed.strip_prefix(kw) {
            match rest.chars().next() {
                None => return Some(lead),
                Some(c) if c.is_whitespace() || c == '<' => return Some(lead),
                Some(_) => {}
            }
        }
    }
    None
}

/// Parses a plan-based verifier reply. The replan's origin is left as
/// `Replan(0)`; callers stamp the turn. Memory is attached by the caller.
pub fn parse_pevr_verdict(text: &str) -> Result<VerifierDecision, ParseError> {
    match leading_keyword(text) {
        Some(Lead::Continue) => Ok(VerifierDecision::continue_(text)),
        Some(Lead::Intervene) => {
            let replan = nonempty_block(text, "REPLAN").ok_or(ParseError::MalformedVerdict(
                "INTERVENE without a <REPLAN> block",
            ))?;
            Ok(VerifierDecision::intervene(
                Handoff::Replan {
                    replan: Plan {
                        text: replan.to_string(),
                        origin: PlanOrigin::Replan(0),
                    },
                    memory: String::new(),
                },
                text,
            ))
        }
        None => Err(ParseError::MalformedVerdict(
            "expected CONTINUE or INTERVENE",
        )),
    }
}

/// Parses a query-based verifier reply into summary + advice.
pub fn parse_eva_verdict(text: &str) -> Result<VerifierDecision, ParseError> {
    match leading_keyword(text) {
        Some(Lead::Continue) => Ok(VerifierDecision::continue_(text)),
        Some(Lead::Intervene) => {
            let summary = nonempty_block(text, "SUMMARY").ok_or(ParseError::MalformedVerdict(
                "INTERVENE without a <SUMMARY> block",
            ))?;
            let advice = nonempty_block(text, "ADVICE").ok_or(ParseError::MalformedVerdict(
                "INTERVENE without an <ADVICE> block",
            ))?;
            Ok(VerifierDecision::intervene(
                Handoff::Advice {
                    summary: summary.to_string(),
                    advice: advice.to_string(),
                },
                text,
            ))
        }
        None => Err(ParseError::MalformedVerdict(
            "expected CONTINUE or INTERVENE",
        )),
    }
}

/// A tool call extracted from executor output, with the reasoning before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAction {
    pub call: ToolCall,
    pub reasoning: String,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offset of the `]` closing the bracket opened at `open`. Falls back
/// to the last `]` in the text when brackets never balance.
fn closing_bracket(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, c) in text[open..].char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(open + i);
                }
            }
            _ => {}
        }
    }
    text[open + 1..].rfind(']').map(|i| open + 1 + i)
}

/// Extracts the last `name[argument]` call whose name is one of `tools`.
///
/// Occurrences are scanned left to right without overlap, so a call nested
/// inside another call's argument is part of that argument. The argument is
/// kept verbatim. Reasoning is the trimmed text before the call, minus a
/// trailing `Tool call:` label.
pub fn parse_tool_call<S: AsRef<str>>(text: &str, tools: &[S]) -> Result<ParsedAction, ParseError> {
    let mut found: Option<(usize, usize, usize, &str)> = None; // (start, open, close, name)
    let mut pos = 0;
    'scan: while pos < text.len() {
        let mut next: Option<(usize, &str)> = None;
        for tool in tools {
            let name = tool.as_ref();
            if name.is_empty() {
                continue;
            }
            let pattern = format!("{name}[");
            let mut from = pos;
            while let Some(rel) = text[from..].find(&pattern) {
                let start = from + rel;
                let boundary = text[..start]
                    .chars()
                    .next_back()
                    .is_none_or(|c| !is_word_char(c));
                if boundary {
                    if next.is_none_or(|(s, _)| start < s) {
                        next = Some((start, name));
                    }
                    break;
                }
                from = start + name.len();
            }
        }
        let Some((start, name)) = next else {
            break 'scan;
        };
        let open = start + name.len();
        match closing_bracket(text, open) {
            Some(close) => {
                found = Some((start, open, close, name));
                pos = close + 1;
            }
            None => pos = open + 1,
        }
    }

    let (start, open, close, name) = found.ok_or(ParseError::NoToolCall)?;
    let mut reasoning = text[..start].trim_end();
    if let Some(stripped) = reasoning.strip_suffix("Tool call:") {
        reasoning = stripped;
    }
    Ok(ParsedAction {
        call: ToolCall::new(name, &text[open + 1..close]),
        reasoning: reasoning.trim().to_string(),
    })
}

/// Renders the tool-call log handed to a freshly reset executor or to a
/// verifier. Reasoning traces are left out; turns without a well-formed call
/// or without an observation contribute nothing.
pub fn format_memory(turns: &[TurnRecord]) -> String {
    let blocks: Vec<String> = turns
        .iter()
        .filter_map(|turn| {
            let call = turn.action.as_ref()?;
            let obs = turn.observation.as_ref()?;
            Some(format!("Step {}\nTool call: {call}\nOutput: {obs}", turn.t))
        })
        .collect();
    blocks.join("\n\n")
}

/// Renders the current context's turns for a verifier, reasoning included.
pub fn format_executor_context(turns: &[TurnRecord]) -> String {
    let blocks: Vec<String> = turns
        .iter()
        .map(|turn| {
            let mut block = format!("Turn {}", turn.t);
            if !turn.reasoning.is_empty() {
                block.push_str(&format!("\nReasoning: {}", turn.reasoning));
            }
            match &turn.action {
                Some(call) => block.push_str(&format!("\nTool call: {call}")),
                None => block.push_str("\nTool call: (none)"),
            }
            if let Some(obs) = &turn.observation {
                block.push_str(&format!("\nObservation: {obs}"));
            }
            block
        })
        .collect();
    blocks.join("\n\n")
}
