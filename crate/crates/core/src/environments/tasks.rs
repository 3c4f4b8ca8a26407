use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::types::{BenchmarkTag, TaskInstance};

pub const DEFAULT_ENVIRONMENT_ID: &str = "wikienv";

#[derive(Debug, thiserror::Error)]
pub enum TaskLoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("task file line {line}: {reason}")]
    SchemaViolation { line: usize, reason: String },
}

#[derive(Deserialize)]
struct TaskLine {
    id: String,
    question: String,
    answers: Vec<String>,
    #[serde(default)]
    benchmark: Option<BenchmarkTag>,
    #[serde(default)]
    environment: Option<String>,
}

/// Reads a JSONL task file: one `{id, question, answers, benchmark?}` object
/// per line. Blank lines are skipped.
pub fn load_tasks(path: &Path) -> Result<Vec<TaskInstance>, TaskLoadError> {
    let io_err = |source| TaskLoadError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut seen = HashSet::new();
    let mut tasks = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let violation = |reason: String| TaskLoadError::SchemaViolation {
            line: line_no,
            reason,
        };
        let raw: TaskLine = serde_json::from_str(&line).map_err(|e| violation(e.to_string()))?;
        if raw.id.is_empty() {
            return Err(violation("empty id".into()));
        }
        if raw.question.trim().is_empty() {
            return Err(violation("empty question".into()));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(violation(format!("duplicate id '{}'", raw.id)));
        }
        tasks.push(TaskInstance {
            id: raw.id,
            query: raw.question,
            gold_answers: raw.answers,
            benchmark_tag: raw.benchmark.unwrap_or(BenchmarkTag::Generic),
            environment_id: raw
                .environment
                .unwrap_or_else(|| DEFAULT_ENVIRONMENT_ID.to_string()),
        });
    }
    Ok(tasks)
}
