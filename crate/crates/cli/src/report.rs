//! `report`: CSV analyses over existing trajectory logs. Reads only its
//! input files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use hymas_core::analysis::{
    intervention_histogram, pareto_frontier, solve_overlap, verifier_confusion, ConfigPoint,
};
use hymas_core::trajectory::{read_trajectories, TrajectoryRecord};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum CostAxis {
    #[default]
    Dollars,
    Joules,
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    pub frontier: bool,
    pub histogram: bool,
    pub confusion: bool,
    pub overlap: bool,
    pub kv_growth: bool,
    pub cost_axis: CostAxis,
}

pub const FRONTIER_FILE: &str = "frontier.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";
pub const HISTOGRAM_SUMMARY_FILE: &str = "histogram_summary.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const OVERLAP_FILE: &str = "overlap.csv";
pub const KV_GROWTH_FILE: &str = "kv_growth.csv";

pub const FRONTIER_COLUMNS: &str = "label,cost,performance,on_frontier";
pub const HISTOGRAM_COLUMNS: &str = "label,interventions,count,frequency";
pub const HISTOGRAM_SUMMARY_COLUMNS: &str = "label,n,mean,q1,median,q3";
pub const CONFUSION_COLUMNS: &str =
    "label,tp,fp,tn,fn,total,fn_rate,fp_rate,fn_rate_of_failures,fp_rate_of_successes";
pub const OVERLAP_COLUMNS: &str = "region,count";
pub const KV_GROWTH_COLUMNS: &str = "label,task_id,turn,context_tokens,kv_bytes";

/// One input log: its label is the name of the directory holding it, or the
/// file stem for a bare file.
pub struct RunLog {
    pub label: String,
    pub records: Vec<TrajectoryRecord>,
}

fn label_for(path: &Path) -> String {
    let from_dir = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    match from_dir {
        Some(d)
            if path
                .file_name()
                .is_some_and(|f| f == crate::runner::TRAJECTORIES_FILE) =>
        {
            d
        }
        _ => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string()),
    }
}

/// Accepts a log file or a run directory containing one.
pub fn load_log(path: &Path) -> Result<RunLog, CliError> {
    let file = if path.is_dir() {
        path.join(crate::runner::TRAJECTORIES_FILE)
    } else {
        path.to_path_buf()
    };
    let records = read_trajectories(&file).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(RunLog {
        label: label_for(&file),
        records,
    })
}

fn mean_score(records: &[TrajectoryRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.score.unwrap_or(0.0)).sum::<f64>() / records.len() as f64
}

/// One point per log: total cost on the chosen axis against mean score.
pub fn frontier_csv(logs: &[RunLog], axis: CostAxis) -> String {
    let points: Vec<ConfigPoint> = logs
        .iter()
        .map(|log| {
            let cost = match axis {
                CostAxis::Dollars => log
                    .records
                    .iter()
                    .map(|r| r.totals.cost_usd)
                    .sum::<hymas_core::Usd>()
                    .as_dollars(),
                CostAxis::Joules => log.records.iter().map(|r| r.totals.energy_joules).sum(),
            };
            ConfigPoint::new(&log.label, cost, mean_score(&log.records))
        })
        .collect();
    let frontier = pareto_frontier(&points);
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| {
        a.cost
            .total_cmp(&b.cost)
            .then_with(|| a.label.cmp(&b.label))
    });
    let mut out = format!("{FRONTIER_COLUMNS}\n");
    for p in sorted {
        let on = frontier.contains(&p);
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.label, p.cost, p.performance, on
        ));
    }
    out
}

pub fn histogram_csvs(logs: &[RunLog]) -> (String, String) {
    let mut rows = format!("{HISTOGRAM_COLUMNS}\n");
    let mut summary = format!("{HISTOGRAM_SUMMARY_COLUMNS}\n");
    for log in logs {
        let h = intervention_histogram(&log.records);
        for (k, c) in &h.counts {
            rows.push_str(&format!(
                "{},{k},{c},{}\n",
                log.label,
                *c as f64 / h.n as f64
            ));
        }
        let [q1, q2, q3] = h
            .quartiles
            .map_or([String::new(), String::new(), String::new()], |q| {
                q.map(|x| x.to_string())
            });
        summary.push_str(&format!(
            "{},{},{},{q1},{q2},{q3}\n",
            log.label, h.n, h.mean
        ));
    }
    (rows, summary)
}

pub fn confusion_csv(logs: &[RunLog]) -> Result<String, CliError> {
    let mut out = format!("{CONFUSION_COLUMNS}\n");
    for log in logs {
        let r = verifier_confusion(log.records.iter().map(|r| (r, r.success == Some(true))))
            .map_err(|e| CliError::Input(format!("{}: {e}", log.label)))?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            log.label,
            r.tp,
            r.fp,
            r.tn,
            r.fn_,
            r.total,
            r.fn_rate,
            r.fp_rate,
            r.fn_rate_of_failures,
            r.fp_rate_of_successes
        ));
    }
    Ok(out)
}

/// Solved-task sets per log, split into Venn regions. Labels must be
/// distinct.
pub fn overlap_csv(logs: &[RunLog]) -> Result<String, CliError> {
    let mut sets: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for log in logs {
        let solved = log
            .records
            .iter()
            .filter(|r| r.success == Some(true))
            .map(|r| r.task_id.clone())
            .collect();
        if sets.insert(log.label.clone(), solved).is_some() {
            return Err(CliError::Input(format!(
                "duplicate run label '{}'",
                log.label
            )));
        }
    }
    let report = solve_overlap(&sets).map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = format!("{OVERLAP_COLUMNS}\n");
    for region in &report.regions {
        out.push_str(&format!("{},{}\n", region.label(), region.count));
    }
    Ok(out)
}

/// Per-turn executor context size. KV bytes are linear in context length,
/// so the per-token factor is recovered from each record's totals; it is
/// blank when the executor had no KV geometry.
pub fn kv_growth_csv(logs: &[RunLog]) -> String {
    let mut out = format!("{KV_GROWTH_COLUMNS}\n");
    for log in logs {
        for r in &log.records {
            let per_token = (r.totals.max_kv_bytes > 0 && r.totals.max_context_tokens > 0)
                .then(|| r.totals.max_kv_bytes / r.totals.max_context_tokens);
            for t in &r.turns {
                let c = t.usage.context_tokens();
                let kv = per_token.map(|b| (b * c).to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{c},{kv}\n", log.label, r.task_id, t.t));
            }
        }
    }
    out
}

pub fn cmd_report(opts: &ReportOptions) -> Result<Vec<PathBuf>, CliError> {
    if opts.inputs.is_empty() {
        return Err(CliError::Config(
            "report needs at least one trajectory log".into(),
        ));
    }
    if !(opts.frontier || opts.histogram || opts.confusion || opts.overlap || opts.kv_growth) {
        return Err(CliError::Config("select at least one analysis".into()));
    }
    let logs = opts
        .inputs
        .iter()
        .map(|p| load_log(p))
        .collect::<Result<Vec<_>, _>>()?;

    // Compute everything before writing anything.
    let mut files: Vec<(&str, String)> = Vec::new();
    if opts.frontier {
        files.push((FRONTIER_FILE, frontier_csv(&logs, opts.cost_axis)));
    }
    if opts.histogram {
        let (rows, summary) = histogram_csvs(&logs);
        files.push((HISTOGRAM_FILE, rows));
        files.push((HISTOGRAM_SUMMARY_FILE, summary));
    }
    if opts.confusion {
        files.push((CONFUSION_FILE, confusion_csv(&logs)?));
    }
    if opts.overlap {
        files.push((OVERLAP_FILE, overlap_csv(&logs)?));
    }
    if opts.kv_growth {
        files.push((KV_GROWTH_FILE, kv_growth_csv(&logs)));
    }

    fs::create_dir_all(&opts.out).map_err(|e| CliError::io(&opts.out, e))?;
    let mut written = Vec::new();
    for (name, content) in files {
        let path = opts.out.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
