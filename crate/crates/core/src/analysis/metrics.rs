use std::collections::HashMap;

use crate::trajectory::{Termination, TrajectoryRecord};
use crate::types::BenchmarkTag;

/// QA answers count as correct when ROUGE-1 F1 exceeds this, strictly.
pub const SUCCESS_F1_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("no gold answers to score against")]
    NoGold,
}

/// Lowercases, drops ASCII punctuation, removes the articles a/an/the, and
/// collapses whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    no_punct
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn answer_tokens(text: &str) -> Vec<String> {
    normalize_answer(text)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S]) -> Result<bool, MetricError> {
    if golds.is_empty() {
        return Err(MetricError::NoGold);
    }
    let p = normalize_answer(pred);
    Ok(golds.iter().any(|g| normalize_answer(g.as_ref()) == p))
}

fn unigram_f1(pred: &[String], gold: &[String]) -> f64 {
    // Two empty answers are the same answer.
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in gold {
        *counts.entry(g).or_default() += 1;
    }
    let mut overlap = 0usize;
    for p in pred {
        if let Some(c) = counts.get_mut(p.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    // 2PR/(P+R) with P = o/|pred| and R = o/|gold|, in the form with a
    // single rounding.
    2.0 * overlap as f64 / (pred.len() + gold.len()) as f64
}

/// Clipped unigram-overlap F1 over normalized tokens, maximized over golds.
pub fn rouge1_f1<S: AsRef<str>>(pred: &str, golds: &[S]) -> Result<f64, MetricError> {
    if golds.is_empty() {
        return Err(MetricError::NoGold);
    }
    let p = answer_tokens(pred);
    Ok(golds
        .iter()
        .map(|g| unigram_f1(&p, &answer_tokens(g.as_ref())))
        .fold(0.0, f64::max))
}

/// The raw score reported for a task: F1 for QA benchmarks, EM as 0/1
/// otherwise.
pub fn score_answer<S: AsRef<str>>(
    tag: BenchmarkTag,
    pred: &str,
    golds: &[S],
) -> Result<f64, MetricError> {
    match tag {
        BenchmarkTag::Hotpotqa | BenchmarkTag::Fanoutqa => rouge1_f1(pred, golds),
        BenchmarkTag::Generic => exact_match(pred, golds).map(|m| if m { 1.0 } else { 0.0 }),
    }
}

/// Success label. Anything but a normal finish is a failure, as is a task
/// with no gold answers.
pub fn task_success<S: AsRef<str>>(
    tag: BenchmarkTag,
    record: &TrajectoryRecord,
    golds: &[S],
) -> bool {
    if record.termination != Termination::Finished {
        return false;
    }
    let Some(answer) = &record.final_answer else {
        return false;
    };
    match tag {
        BenchmarkTag::Hotpotqa | BenchmarkTag::Fanoutqa => {
            rouge1_f1(answer, golds).is_ok_and(|f| f > SUCCESS_F1_THRESHOLD)
        }
        BenchmarkTag::Generic => exact_match(answer, golds).unwrap_or(false),
    }
}
