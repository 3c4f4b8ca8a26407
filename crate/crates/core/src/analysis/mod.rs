//! Scoring and experiment-level statistics over trajectory logs.

mod audit;
mod metrics;
mod pareto;

pub use audit::{
    classify, intervention_histogram, solve_overlap, verifier_confusion, AnalysisError,
    ConfusionLabel, ConfusionReport, InterventionHistogram, OverlapRegion, OverlapReport,
};
pub use metrics::{
    answer_tokens, exact_match, normalize_answer, rouge1_f1, score_answer, task_success,
    MetricError, SUCCESS_F1_THRESHOLD,
};
pub use pareto::{pareto_frontier, ConfigPoint};
