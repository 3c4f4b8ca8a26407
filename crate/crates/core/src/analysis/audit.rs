use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trajectory::TrajectoryRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("trajectory '{task_id}' was not produced in audit mode")]
    NonAuditRecord { task_id: String },
    #[error("overlap needs 2 or 3 named sets, got {0}")]
    ArityUnsupported(usize),
}

/// Verifier outcome against the task's eventual result. Intervening on a
/// failing trajectory is the positive, correct call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConfusionLabel {
    Tp,
    Fp,
    Tn,
    Fn,
}

impl ConfusionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfusionLabel::Tp => "TP",
            ConfusionLabel::Fp => "FP",
            ConfusionLabel::Tn => "TN",
            ConfusionLabel::Fn => "FN",
        }
    }
}

pub fn classify(record: &TrajectoryRecord, success: bool) -> Result<ConfusionLabel, AnalysisError> {
    if !record.architecture.is_audit() {
        return Err(AnalysisError::NonAuditRecord {
            task_id: record.task_id.clone(),
        });
    }
    let intervened = record.intervene_count() > 0;
    Ok(match (success, intervened) {
        (false, true) => ConfusionLabel::Tp,
        (true, true) => ConfusionLabel::Fp,
        (true, false) => ConfusionLabel::Tn,
        (false, false) => ConfusionLabel::Fn,
    })
}

/// Confusion counts with two normalizations: over all audited trajectories,
/// and per condition (FN over failures, FP over successes). Rates with a
/// zero denominator are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub total: usize,
    pub fn_rate: f64,
    pub fp_rate: f64,
    pub fn_rate_of_failures: f64,
    pub fp_rate_of_successes: f64,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

pub fn verifier_confusion<'a, I>(audited: I) -> Result<ConfusionReport, AnalysisError>
where
    I: IntoIterator<Item = (&'a TrajectoryRecord, bool)>,
{
    let mut r = ConfusionReport::default();
    for (record, success) in audited {
        match classify(record, success)? {
            ConfusionLabel::Tp => r.tp += 1,
            ConfusionLabel::Fp => r.fp += 1,
            ConfusionLabel::Tn => r.tn += 1,
            ConfusionLabel::Fn => r.fn_ += 1,
        }
        r.total += 1;
    }
    r.fn_rate = ratio(r.fn_, r.total);
    r.fp_rate = ratio(r.fp, r.total);
    r.fn_rate_of_failures = ratio(r.fn_, r.fn_ + r.tp);
    r.fp_rate_of_successes = ratio(r.fp, r.fp + r.tn);
    Ok(r)
}

/// Distribution of applied interventions per trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub n: usize,
    pub mean: f64,
    /// First quartile, median, third quartile; linear interpolation between
    /// order statistics. `None` for an empty input.
    pub quartiles: Option<[f64; 3]>,
}

fn quantile(sorted: &[usize], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + frac * (sorted[hi] as f64 - sorted[lo] as f64)
}

pub fn intervention_histogram<'a, I>(records: I) -> InterventionHistogram
where
    I: IntoIterator<Item = &'a TrajectoryRecord>,
{
    let mut values: Vec<usize> = records
        .into_iter()
        .map(|r| r.applied_interventions())
        .collect();
    histogram_of(&mut values)
}

pub(crate) fn histogram_of(values: &mut [usize]) -> InterventionHistogram {
    values.sort_unstable();
    let mut counts = BTreeMap::new();
    for &v in values.iter() {
        *counts.entry(v).or_default() += 1;
    }
    let n = values.len();
    InterventionHistogram {
        counts,
        n,
        mean: ratio(values.iter().sum(), n),
        quartiles: (n > 0).then(|| {
            [
                quantile(values, 0.25),
                quantile(values, 0.5),
                quantile(values, 0.75),
            ]
        }),
    }
}

/// One Venn region: items in exactly the sets named by `members`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRegion {
    pub members: Vec<String>,
    pub count: usize,
}

impl OverlapRegion {
    pub fn label(&self) -> String {
        self.members.join("&")
    }
}

/// All `2^k - 1` regions, exclusive singles first, then pairs, then the
/// triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub names: Vec<String>,
    pub regions: Vec<OverlapRegion>,
}

impl OverlapReport {
    pub fn count(&self, members: &[&str]) -> Option<usize> {
        self.regions
            .iter()
            .find(|r| {
                r.members
                    .iter()
                    .map(String::as_str)
                    .eq(members.iter().copied())
            })
            .map(|r| r.count)
    }
}

pub fn solve_overlap<T: Ord>(
    sets: &BTreeMap<String, BTreeSet<T>>,
) -> Result<OverlapReport, AnalysisError> {
    let k = sets.len();
    if !(2..=3).contains(&k) {
        return Err(AnalysisError::ArityUnsupported(k));
    }
    let names: Vec<String> = sets.keys().cloned().collect();
    let mut by_mask = vec![0usize; 1 << k];
    let universe: BTreeSet<&T> = sets.values().flatten().collect();
    for item in universe {
        let mask = sets
            .values()
            .enumerate()
            .filter(|(_, s)| s.contains(item))
            .fold(0usize, |m, (i, _)| m | (1 << i));
        by_mask[mask] += 1;
    }
    let mut masks: Vec<usize> = (1..1 << k).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let regions = masks
        .into_iter()
        .map(|m| OverlapRegion {
            members: (0..k)
                .filter(|i| m & (1 << i) != 0)
                .map(|i| names[i].clone())
                .collect(),
            count: by_mask[m],
        })
        .collect();
    Ok(OverlapReport { names, regions })
}
