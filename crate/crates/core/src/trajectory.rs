//! Trajectory records and their JSONL log format.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::types::{Architecture, TokenUsage, TurnRecord, Usd, Verdict, VerifierDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Finished,
    TurnBudgetExhausted,
    OutOfContext,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorCallRecord {
    pub at_turn: u32,
    pub decision: VerifierDecision,
    /// Summed over the original request and any re-request.
    pub usage: TokenUsage,
    /// False for every call in audit mode and for every Continue.
    pub applied: bool,
    /// Set when the verifier output stayed malformed after one re-request
    /// and was treated as Continue.
    #[serde(default)]
    pub protocol_violation: bool,
    /// Executor context length right after the reset this call triggered.
    #[serde(default)]
    pub reset_context_tokens: Option<u64>,
}

/// The initial planning request of plan-based architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningRecord {
    pub plan: Option<String>,
    pub raw_text: String,
    pub usage: TokenUsage,
    pub attempts: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTotals {
    pub cost_usd: Usd,
    pub energy_joules: f64,
    pub max_context_tokens: u64,
    pub max_kv_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub task_id: String,
    pub architecture: Architecture,
    pub config_digest: String,
    pub verify_interval: u32,
    pub max_turns: u32,
    #[serde(default)]
    pub planning: Option<PlanningRecord>,
    pub turns: Vec<TurnRecord>,
    pub supervisor_calls: Vec<SupervisorCallRecord>,
    pub resets: Vec<u32>,
    pub final_answer: Option<String>,
    pub termination: Termination,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub score: Option<f64>,
    #[serde(default)]
    pub success: Option<bool>,
    pub totals: TrajectoryTotals,
}

impl TrajectoryRecord {
    pub fn intervene_count(&self) -> usize {
        self.supervisor_calls
            .iter()
            .filter(|c| c.decision.verdict == Verdict::Intervene)
            .count()
    }

    pub fn applied_interventions(&self) -> usize {
        self.supervisor_calls.iter().filter(|c| c.applied).count()
    }

    /// Last turn whose environment step completed.
    pub fn last_completed_turn(&self) -> u32 {
        self.turns
            .iter()
            .rev()
            .find(|t| t.observation.is_some())
            .map_or(0, |t| t.t)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trajectory record serializes")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: schema violation: {reason}")]
    SchemaViolation {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// Reads every record from a trajectory log. Blank lines are skipped.
pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>, LogError> {
    let io_err = |source| LogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| LogError::SchemaViolation {
            path: path.to_path_buf(),
            line: idx + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Append-only JSONL writer. One writer per file.
pub struct TrajectoryWriter {
    path: PathBuf,
    file: File,
}

impl TrajectoryWriter {
    pub fn append(path: &Path) -> Result<Self, LogError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| LogError::Io {
                path: path.to_path_buf(),
                source,
            })?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> Result<(), LogError> {
        let mut line = record.to_json_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }
}
