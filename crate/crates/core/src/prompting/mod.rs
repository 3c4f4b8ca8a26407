//! Prompt templates for every agent role and parsers for their structured
//! outputs.
//!
//! Templates are stored as text assets under `templates/` and use
//! `{{ name }}` placeholders. Parsers are pure functions over model output.

mod parse;
mod templates;

pub use parse::{
    format_executor_context, format_memory, parse_eva_verdict, parse_pevr_verdict, parse_plan,
    parse_tool_call, ParseError, ParsedAction,
};
pub use templates::{render, render_named, RenderError, TemplateId, WIKIENV_TOOL_PROMPT};
