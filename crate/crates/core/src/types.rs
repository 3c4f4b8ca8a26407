//! Domain types shared across the engine.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Which benchmark family a task belongs to. Drives default turn budgets and
/// the success rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkTag {
    Hotpotqa,
    Fanoutqa,
    Generic,
}

impl BenchmarkTag {
    /// Default maximum number of executor turns for this benchmark family.
    pub fn default_max_turns(self) -> u32 {
        match self {
            BenchmarkTag::Hotpotqa => 10,
            BenchmarkTag::Fanoutqa => 20,
            BenchmarkTag::Generic => 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    pub query: String,
    pub gold_answers: Vec<String>,
    pub benchmark_tag: BenchmarkTag,
    pub environment_id: String,
}

/// A single `name[argument]` tool invocation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub argument: String,
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, argument: impl Into<String>) -> Self {
        Self {
            tool: tool.into(),
            argument: argument.into(),
        }
    }
}

impl fmt::Display for ToolCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.tool, self.argument)
    }
}

/// Token counts reported for one model call.
///
/// `prompt_tokens` includes the cached prefix; `cached_tokens` is the subset
/// of it served from the provider's prompt cache.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub cached_tokens: u64,
    pub generated_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, cached_tokens: u64, generated_tokens: u64) -> Self {
        debug_assert!(cached_tokens <= prompt_tokens);
        Self {
            prompt_tokens,
            cached_tokens,
            generated_tokens,
        }
    }

    /// Tokens resident in the model's context after the call.
    pub fn context_tokens(&self) -> u64 {
        self.prompt_tokens + self.generated_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            cached_tokens: self.cached_tokens + rhs.cached_tokens,
            generated_tokens: self.generated_tokens + rhs.generated_tokens,
        }
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

/// One completed (or aborted) executor turn.
///
/// `observation` is absent only for the final turn of an out-of-context
/// trajectory, where the environment was never stepped. `action` is absent
/// when the executor emitted no parsable tool call; the observation then
/// carries the format error shown to the executor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub t: u32,
    pub reasoning: String,
    pub action: Option<ToolCall>,
    pub observation: Option<String>,
    pub usage: TokenUsage,
    pub wall_time_ms: u64,
}

impl TurnRecord {
    /// The assistant message this turn contributes to the executor context.
    pub fn assistant_text(&self) -> String {
        match (&self.action, self.reasoning.is_empty()) {
            (Some(call), true) => format!("Tool call: {call}"),
            (Some(call), false) => format!("{}\nTool call: {call}", self.reasoning),
            (None, _) => self.reasoning.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "turn")]
pub enum PlanOrigin {
    Initial,
    Replan(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub text: String,
    pub origin: PlanOrigin,
}

/// Payload of an intervention: what the executor is re-seeded with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Handoff {
    Replan {
        replan: Plan,
        memory: String,
    },
    Advice {
        summary: String,
        advice: String,
    },
    /// Used only by the no-summary ablation: the tool-call log stands in for
    /// the summary.
    AdviceMemory {
        memory: String,
        advice: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Continue,
    Intervene,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierDecision {
    pub verdict: Verdict,
    pub payload: Option<Handoff>,
    pub raw_text: String,
}

impl VerifierDecision {
    pub fn continue_(raw_text: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Continue,
            payload: None,
            raw_text: raw_text.into(),
        }
    }

    pub fn intervene(payload: Handoff, raw_text: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Intervene,
            payload: Some(payload),
            raw_text: raw_text.into(),
        }
    }

    pub fn is_intervene(&self) -> bool {
        self.verdict == Verdict::Intervene
    }
}

/// US dollars held as an exact integer count of picodollars.
///
/// Per-token prices such as $2.50 / 1M tokens are 2.5 micro-dollars per token,
/// so micro-dollar resolution cannot hold a single call's cost exactly.
/// Picodollars can, for any price given in whole micro-dollars per million
/// tokens, which keeps sums exact and order-independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Usd(u128);

impl Usd {
    pub const ZERO: Usd = Usd(0);
    pub const PICOS_PER_DOLLAR: u128 = 1_000_000_000_000;

    pub fn from_picodollars(p: u128) -> Self {
        Usd(p)
    }

    pub fn picodollars(self) -> u128 {
        self.0
    }

    /// Whole micro-dollars, rounded half up.
    pub fn microdollars(self) -> u128 {
        (self.0 + 500_000) / 1_000_000
    }

    pub fn from_dollars(d: f64) -> Self {
        assert!(
            d.is_finite() && d >= 0.0,
            "dollar amount must be finite and non-negative"
        );
        Usd((d * Self::PICOS_PER_DOLLAR as f64).round() as u128)
    }

    pub fn as_dollars(self) -> f64 {
        let whole = (self.0 / Self::PICOS_PER_DOLLAR) as f64;
        let frac = (self.0 % Self::PICOS_PER_DOLLAR) as f64 / Self::PICOS_PER_DOLLAR as f64;
        whole + frac
    }
}

impl Add for Usd {
    type Output = Usd;
    fn add(self, rhs: Usd) -> Usd {
        Usd(self.0 + rhs.0)
    }
}

impl AddAssign for Usd {
    fn add_assign(&mut self, rhs: Usd) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Usd {
        iter.fold(Usd::ZERO, Add::add)
    }
}

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let micros = self.microdollars();
        write!(f, "{}.{:06}", micros / 1_000_000, micros % 1_000_000)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_dollars())
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v < 0.0 {
            return Err(serde::de::Error::custom(
                "cost_usd must be a non-negative number",
            ));
        }
        Ok(Usd::from_dollars(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Edge,
    Cloud,
}

/// Dollars per one million tokens for each of the three disjoint token
/// classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pricing {
    pub prefill: f64,
    pub cached: f64,
    pub generated: f64,
}

impl Pricing {
    /// Azure OpenAI GPT-4o on-demand rates.
    pub const GPT4O: Pricing = Pricing {
        prefill: 2.5,
        cached: 1.25,
        generated: 10.0,
    };
}

/// Attention geometry needed for KV-cache sizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KvGeometry {
    pub layers: u64,
    pub kv_heads: u64,
    pub head_dim: u64,
    pub bytes_per_activation: u64,
}

/// Default hardware efficiency, in operations per joule, for edge NPUs.
pub const DEFAULT_EFFICIENCY_OPS_PER_JOULE: f64 = 1.5e12;

/// Everything the accounting formulas need to know about one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    pub placement: Placement,
    /// Parameter count N. Required for edge energy.
    #[serde(default)]
    pub param_count: Option<f64>,
    #[serde(default)]
    pub kv: Option<KvGeometry>,
    /// Hardware efficiency in ops/J. Required for edge placement.
    #[serde(default)]
    pub efficiency: Option<f64>,
    /// Required for cloud placement.
    #[serde(default)]
    pub pricing: Option<Pricing>,
    pub context_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("model '{0}': edge placement requires param_count and efficiency")]
    EdgeMissingEnergyFields(String),
    #[error("model '{0}': cloud placement requires pricing")]
    CloudMissingPricing(String),
    #[error("model '{name}': field {field} must be positive")]
    NonPositive { name: String, field: &'static str },
    #[error("model '{name}': price {field} must be finite and non-negative")]
    BadPrice { name: String, field: &'static str },
}

impl ModelProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let pos = |ok: bool, field: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(ProfileError::NonPositive {
                    name: self.name.clone(),
                    field,
                })
            }
        };
        pos(self.context_cap > 0, "context_cap")?;
        if let Some(n) = self.param_count {
            pos(n.is_finite() && n > 0.0, "param_count")?;
        }
        if let Some(eta) = self.efficiency {
            pos(eta.is_finite() && eta > 0.0, "efficiency")?;
        }
        if let Some(kv) = self.kv {
            pos(kv.layers > 0, "layers")?;
            pos(kv.kv_heads > 0, "kv_heads")?;
            pos(kv.head_dim > 0, "head_dim")?;
            pos(kv.bytes_per_activation > 0, "bytes_per_activation")?;
        }
        if let Some(p) = self.pricing {
            for (field, v) in [
                ("prefill", p.prefill),
                ("cached", p.cached),
                ("generated", p.generated),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ProfileError::BadPrice {
                        name: self.name.clone(),
                        field,
                    });
                }
            }
        }
        match self.placement {
            Placement::Edge if self.param_count.is_none() || self.efficiency.is_none() => {
                Err(ProfileError::EdgeMissingEnergyFields(self.name.clone()))
            }
            Placement::Cloud if self.pricing.is_none() => {
                Err(ProfileError::CloudMissingPricing(self.name.clone()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Monolithic,
    Pevr,
    Eva,
    EvaNosummary,
    PevrAudit,
    EvaAudit,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Monolithic,
        Architecture::Pevr,
        Architecture::Eva,
        Architecture::EvaNosummary,
        Architecture::PevrAudit,
        Architecture::EvaAudit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Monolithic => "monolithic",
            Architecture::Pevr => "pevr",
            Architecture::Eva => "eva",
            Architecture::EvaNosummary => "eva_nosummary",
            Architecture::PevrAudit => "pevr_audit",
            Architecture::EvaAudit => "eva_audit",
        }
    }

    pub fn needs_supervisor(self) -> bool {
        self != Architecture::Monolithic
    }

    pub fn is_audit(self) -> bool {
        matches!(self, Architecture::PevrAudit | Architecture::EvaAudit)
    }

    /// True for architectures that start from a supervisor plan.
    pub fn is_plan_based(self) -> bool {
        matches!(self, Architecture::Pevr | Architecture::PevrAudit)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown architecture '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_generated_tokens: u32,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_generated_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub architecture: Architecture,
    /// Turn budget T. `None` selects the per-benchmark default.
    pub max_turns: Option<u32>,
    /// Verification interval T_v.
    pub verify_interval: u32,
    pub executor: ModelProfile,
    pub supervisor: Option<ModelProfile>,
    pub environment_id: String,
    pub seed: u64,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunConfigError {
    #[error("max_turns must be at least 1")]
    ZeroMaxTurns,
    #[error("verify_interval must be at least 1")]
    ZeroVerifyInterval,
    #[error("architecture {0} requires a supervisor model")]
    MissingSupervisor(Architecture),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunConfigError> {
        if self.max_turns == Some(0) {
            return Err(RunConfigError::ZeroMaxTurns);
        }
        if self.verify_interval == 0 {
            return Err(RunConfigError::ZeroVerifyInterval);
        }
        self.executor.validate()?;
        match &self.supervisor {
            Some(s) => s.validate()?,
            None if self.architecture.needs_supervisor() => {
                return Err(RunConfigError::MissingSupervisor(self.architecture))
            }
            None => {}
        }
        Ok(())
    }

    pub fn max_turns_for(&self, tag: BenchmarkTag) -> u32 {
        self.max_turns.unwrap_or_else(|| tag.default_max_turns())
    }

    /// Hex SHA-256 over the canonical JSON form of this config.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("RunConfig serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
