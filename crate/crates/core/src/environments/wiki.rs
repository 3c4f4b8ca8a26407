use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{Environment, Observation};
use crate::prompting::WIKIENV_TOOL_PROMPT;
use crate::types::ToolCall;

pub const WIKI_TOOLS: [&str; 3] = ["search", "lookup", "finish"];
pub const SEARCH_SENTENCES: usize = 5;
pub const SIMILAR_TITLES: usize = 5;
pub const DEFAULT_OBSERVATION_BUDGET: usize = 4000;
pub const NO_MORE_RESULTS: &str = "No more results.";
pub const NO_PAGE_LOADED: &str = "No page is loaded. Call search[entity] first.";
const TRUNCATION_MARKER: &str = " [truncated]";

/// Lowercase, trim, and collapse internal whitespace.
pub fn normalize_title(title: &str) -> String {
    title
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits on `.`, `!` or `?` followed by whitespace or end of text. The
/// delimiter stays with its sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|(_, next)| next.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = end;
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WikiPage {
    pub title: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

/// Immutable page store keyed by normalized title.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WikiCorpus {
    pages: BTreeMap<String, WikiPage>,
}

#[derive(Deserialize)]
struct CorpusLine {
    title: String,
    text: String,
}

impl WikiCorpus {
    /// Builds a corpus from `(title, text)` pairs, segmenting each text.
    pub fn from_pages<I, T, S>(pages: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (T, S)>,
        T: Into<String>,
        S: AsRef<str>,
    {
        let mut corpus = WikiCorpus::default();
        for (idx, (title, text)) in pages.into_iter().enumerate() {
            corpus.insert(idx + 1, title.into(), text.as_ref())?;
        }
        Ok(corpus)
    }

    fn insert(&mut self, line: usize, title: String, text: &str) -> Result<(), CorpusError> {
        let key = normalize_title(&title);
        if key.is_empty() {
            return Err(CorpusError::Invalid {
                line,
                reason: "empty title".into(),
            });
        }
        let sentences = split_sentences(text);
        if sentences.is_empty() {
            return Err(CorpusError::Invalid {
                line,
                reason: format!("page '{title}' has no sentences"),
            });
        }
        if self.pages.contains_key(&key) {
            return Err(CorpusError::Invalid {
                line,
                reason: format!("duplicate title '{title}'"),
            });
        }
        self.pages.insert(
            key,
            WikiPage {
                title: title.trim().to_string(),
                sentences,
            },
        );
        Ok(())
    }

    /// Loads JSONL with one `{title, text}` object per line.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut corpus = WikiCorpus::default();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CorpusLine =
                serde_json::from_str(&line).map_err(|e| CorpusError::Invalid {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            corpus.insert(idx + 1, parsed.title, &parsed.text)?;
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }

    pub fn get(&self, title: &str) -> Option<&WikiPage> {
        self.pages.get(&normalize_title(title))
    }

    pub fn titles(&self) -> impl Iterator<Item = &str> {
        self.pages.values().map(|p| p.title.as_str())
    }

    /// Hex SHA-256 over every page, in key order.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (key, page) in &self.pages {
            h.update(key.as_bytes());
            h.update([0]);
            h.update(page.title.as_bytes());
            for s in &page.sentences {
                h.update([0]);
                h.update(s.as_bytes());
            }
            h.update([1]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Up to five titles ranked by shared normalized tokens with `query`,
    /// ties broken by title.
    pub fn similar_titles(&self, query: &str) -> Vec<&str> {
        let q = normalize_title(query);
        let q_tokens: Vec<&str> = q.split(' ').filter(|t| !t.is_empty()).collect();
        let mut scored: Vec<(usize, &str)> = self
            .pages
            .iter()
            .map(|(key, page)| {
                let shared = key.split(' ').filter(|t| q_tokens.contains(t)).count();
                (shared, page.title.as_str())
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored
            .into_iter()
            .take(SIMILAR_TITLES)
            .map(|(_, t)| t)
            .collect()
    }
}

/// Per-trajectory browsing state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WikiSession {
    /// Normalized title of the loaded page.
    pub current_page: Option<String>,
    pub lookup_query: Option<String>,
    /// Matches already returned for `lookup_query`.
    pub lookup_cursor: usize,
}

impl WikiSession {
    fn clear_lookup(&mut self) {
        self.lookup_query = None;
        self.lookup_cursor = 0;
    }
}

pub fn wiki_search(corpus: &WikiCorpus, session: &mut WikiSession, entity: &str) -> Observation {
    let key = normalize_title(entity);
    match corpus.pages.get(&key) {
        Some(page) => {
            session.current_page = Some(key);
            session.clear_lookup();
            let n = page.sentences.len().min(SEARCH_SENTENCES);
            Observation::text(page.sentences[..n].join(" "))
        }
        None => {
            let similar = corpus.similar_titles(entity).join(", ");
            Observation::text(format!(
                "Could not find {}. Similar: [{similar}].",
                entity.trim()
            ))
        }
    }
}

pub fn wiki_lookup(corpus: &WikiCorpus, session: &mut WikiSession, query: &str) -> Observation {
    let Some(page) = session
        .current_page
        .as_ref()
        .and_then(|k| corpus.pages.get(k))
    else {
        return Observation::text(NO_PAGE_LOADED);
    };
    if session.lookup_query.as_deref() != Some(query) {
        session.lookup_query = Some(query.to_string());
        session.lookup_cursor = 0;
    }
    let needle = query.to_lowercase();
    let matches: Vec<&String> = page
        .sentences
        .iter()
        .filter(|s| s.to_lowercase().contains(&needle))
        .collect();
    if session.lookup_cursor >= matches.len() {
        return Observation::text(NO_MORE_RESULTS);
    }
    let i = session.lookup_cursor;
    session.lookup_cursor += 1;
    Observation::text(format!(
        "(Result {} / {}) {}",
        i + 1,
        matches.len(),
        matches[i]
    ))
}

fn truncate(text: String, budget: usize) -> String {
    match text.char_indices().nth(budget) {
        None => text,
        Some((cut, _)) => {
            let mut t = text[..cut].trim_end().to_string();
            t.push_str(TRUNCATION_MARKER);
            t
        }
    }
}

/// Read-only simulated Wikipedia with `search`, `lookup`, and `finish`.
#[derive(Debug, Clone)]
pub struct WikiEnv {
    corpus: Arc<WikiCorpus>,
    session: WikiSession,
    observation_budget: usize,
}

impl WikiEnv {
    pub fn new(corpus: Arc<WikiCorpus>) -> Self {
        Self {
            corpus,
            session: WikiSession::default(),
            observation_budget: DEFAULT_OBSERVATION_BUDGET,
        }
    }

    pub fn with_observation_budget(mut self, chars: usize) -> Self {
        self.observation_budget = chars;
        self
    }

    pub fn session(&self) -> &WikiSession {
        &self.session
    }

    pub fn corpus(&self) -> &WikiCorpus {
        &self.corpus
    }
}

impl Environment for WikiEnv {
    fn tool_names(&self) -> Vec<String> {
        WIKI_TOOLS.iter().map(|s| s.to_string()).collect()
    }

    fn tool_prompt(&self) -> String {
        WIKIENV_TOOL_PROMPT.to_string()
    }

    fn reset(&mut self) {
        self.session = WikiSession::default();
    }

    fn step(&mut self, call: &ToolCall) -> Observation {
        let obs = match call.tool.as_str() {
            "search" => wiki_search(&self.corpus, &mut self.session, &call.argument),
            "lookup" => wiki_lookup(&self.corpus, &mut self.session, &call.argument),
            "finish" => return Observation::finish(&call.argument),
            _ => Observation::invalid_tool(&WIKI_TOOLS),
        };
        Observation {
            text: truncate(obs.text, self.observation_budget),
            ..obs
        }
    }
}
