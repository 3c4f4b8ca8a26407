//! Edge/cloud multi-agent orchestration for tool-using language-model
//! agents.
//!
//! An executor runs a ReAct loop against a tool environment; in supervised
//! architectures a second model plans, periodically verifies progress, and
//! intervenes by resetting the executor's context with a handoff prompt.
//! Every model call is logged with its token usage so runs can be priced in
//! dollars (cloud), joules (edge), and peak KV-cache bytes.

pub mod accounting;
pub mod analysis;
pub mod backends;
pub mod context;
pub mod environments;
pub mod orchestrator;
pub mod prompting;
pub mod trajectory;
pub mod types;

pub use types::*;
