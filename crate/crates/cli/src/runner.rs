//! `run` and `sweep`: execute every task of a dataset under one
//! configuration and write the trajectory log.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use hymas_core::backends::{
    ChatBackend, HttpBackend, HttpBackendConfig, RetryPolicy, ScriptEntry, ScriptedBackend,
};
use hymas_core::environments::{
    load_tasks, Environment, ScriptedEnv, ScriptedEnvSpec, WikiCorpus, WikiEnv,
};
use hymas_core::orchestrator::{run_trajectory, Agents};
use hymas_core::trajectory::{read_trajectories, TrajectoryRecord, TrajectoryWriter};
use hymas_core::{Architecture, RunConfig, TaskInstance, Usd};

use crate::config::{BackendSection, EnvironmentSection, ExperimentConfig};
use crate::CliError;

pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Command-line overrides shared by `run` and `sweep`.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub verify_interval: Option<u32>,
}

impl RunOptions {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self {
            config: config.into(),
            ..Default::default()
        }
    }
}

/// Aggregates over every record in a run's log, including records kept from
/// an earlier, resumed invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub architecture: Architecture,
    pub verify_interval: u32,
    pub log_path: PathBuf,
    pub tasks: usize,
    pub new_records: usize,
    pub mean_score: f64,
    pub success_rate: f64,
    pub total_cost: Usd,
    pub total_energy_joules: f64,
    pub mean_max_kv_bytes: f64,
}

impl RunSummary {
    pub fn from_records(
        label: String,
        config: &RunConfig,
        log_path: PathBuf,
        records: &[TrajectoryRecord],
        new_records: usize,
    ) -> Self {
        let n = records.len();
        let mean = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
        Self {
            label,
            architecture: config.architecture,
            verify_interval: config.verify_interval,
            log_path,
            tasks: n,
            new_records,
            mean_score: mean(records.iter().map(|r| r.score.unwrap_or(0.0)).sum()),
            success_rate: mean(records.iter().filter(|r| r.success == Some(true)).count() as f64),
            total_cost: records.iter().map(|r| r.totals.cost_usd).sum(),
            total_energy_joules: records.iter().map(|r| r.totals.energy_joules).sum(),
            mean_max_kv_bytes: mean(records.iter().map(|r| r.totals.max_kv_bytes as f64).sum()),
        }
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: tasks={} new={} mean_score={:.4} success_rate={:.4} total_cost_usd={} total_energy_j={:.3} mean_max_kv_bytes={:.0}",
            self.label,
            self.tasks,
            self.new_records,
            self.mean_score,
            self.success_rate,
            self.total_cost,
            self.total_energy_joules,
            self.mean_max_kv_bytes
        )
    }
}

/// `<arch>-tv<k>`, or the bare architecture name for monolithic runs.
pub fn run_label(config: &RunConfig) -> String {
    match config.architecture {
        Architecture::Monolithic => config.architecture.to_string(),
        arch => format!("{arch}-tv{}", config.verify_interval),
    }
}

enum BackendFactory {
    Http(Arc<HttpBackend>),
    Scripted {
        fallback: Option<Vec<ScriptEntry>>,
        dir: Option<PathBuf>,
    },
}

fn read_script(path: &Path) -> Result<Vec<ScriptEntry>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

impl BackendFactory {
    fn build(section: &BackendSection, seed: u64) -> Result<Self, CliError> {
        Ok(match section {
            BackendSection::Http {
                base_url,
                model,
                api_key_env,
                timeout_secs,
                max_retries,
            } => {
                let api_key = match api_key_env {
                    None => None,
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        CliError::Config(format!("credential variable {var} is not set"))
                    })?),
                };
                let mut config = HttpBackendConfig::new(base_url, model);
                config.api_key = api_key;
                config.timeout = Duration::from_secs(*timeout_secs);
                config.retry = RetryPolicy {
                    max_retries: *max_retries,
                    ..RetryPolicy::default()
                };
                config.seed = Some(seed);
                BackendFactory::Http(Arc::new(HttpBackend::new(config)))
            }
            BackendSection::Scripted {
                script,
                script_dir,
                entries,
            } => {
                let fallback = match (script, entries) {
                    (Some(path), _) => Some(read_script(path)?),
                    (None, Some(e)) => Some(e.clone()),
                    (None, None) => None,
                };
                if let Some(dir) = script_dir {
                    if !dir.is_dir() {
                        return Err(CliError::Input(format!(
                            "script_dir {} is not a directory",
                            dir.display()
                        )));
                    }
                }
                BackendFactory::Scripted {
                    fallback,
                    dir: script_dir.clone(),
                }
            }
        })
    }

    fn for_task(&self, task_id: &str) -> Result<Box<dyn ChatBackend>, CliError> {
        match self {
            BackendFactory::Http(b) => Ok(Box::new(b.clone())),
            BackendFactory::Scripted { fallback, dir } => {
                let own = dir
                    .as_ref()
                    .map(|d| d.join(format!("{task_id}.json")))
                    .filter(|p| p.is_file());
                let entries = match own {
                    Some(path) => read_script(&path)?,
                    None => fallback.clone().unwrap_or_default(),
                };
                Ok(Box::new(ScriptedBackend::new(entries)))
            }
        }
    }
}

enum EnvFactory {
    Wiki(Arc<WikiCorpus>),
    Scripted(ScriptedEnvSpec),
}

impl EnvFactory {
    fn build(config: &ExperimentConfig) -> Result<Self, CliError> {
        Ok(match &config.environment {
            EnvironmentSection::Wikienv => {
                let path = config.corpus.as_ref().expect("validated");
                EnvFactory::Wiki(Arc::new(
                    WikiCorpus::load(path).map_err(|e| CliError::Input(e.to_string()))?,
                ))
            }
            EnvironmentSection::Scripted { script } => {
                let text = fs::read_to_string(script).map_err(|e| CliError::io(script, e))?;
                EnvFactory::Scripted(
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Input(format!("{}: {e}", script.display())))?,
                )
            }
        })
    }

    fn make(&self) -> Box<dyn Environment> {
        match self {
            EnvFactory::Wiki(c) => Box::new(WikiEnv::new(c.clone())),
            EnvFactory::Scripted(spec) => Box::new(ScriptedEnv::from_spec(spec)),
        }
    }
}

/// Everything loaded and checked before any output is created.
struct Prepared {
    config: ExperimentConfig,
    tasks: Vec<TaskInstance>,
    env: EnvFactory,
    executor: BackendFactory,
    supervisor: Option<BackendFactory>,
    out_root: PathBuf,
    parallelism: usize,
}

fn prepare(opts: &RunOptions) -> Result<Prepared, CliError> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        config.run.seed = seed;
    }
    if let Some(p) = opts.parallelism {
        if p == 0 {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        config.parallelism = p;
    }
    if let Some(k) = opts.verify_interval {
        config.run.verify_interval = k;
    }
    let run_config = config.run_config(None)?;
    let tasks = load_tasks(&config.dataset).map_err(|e| CliError::Input(e.to_string()))?;
    let env = EnvFactory::build(&config)?;
    let backend_for = |model: &str| -> Result<BackendFactory, CliError> {
        let name = &config.model(model)?.backend;
        BackendFactory::build(&config.backends[name], run_config.seed)
    };
    let executor = backend_for(&config.run.executor)?;
    let supervisor = match &config.run.supervisor {
        Some(s) => Some(backend_for(s)?),
        None => None,
    };
    Ok(Prepared {
        out_root: opts.out.clone().unwrap_or_else(|| config.output.clone()),
        parallelism: config.parallelism,
        config,
        tasks,
        env,
        executor,
        supervisor,
    })
}

fn run_one(
    prepared: &Prepared,
    config: &RunConfig,
    task: &TaskInstance,
) -> Result<TrajectoryRecord, CliError> {
    let executor = prepared.executor.for_task(&task.id)?;
    let supervisor = match &prepared.supervisor {
        Some(f) => Some(f.for_task(&task.id)?),
        None => None,
    };
    let mut env = prepared.env.make();
    let record = run_trajectory(
        task,
        config,
        Agents {
            executor: executor.as_ref(),
            supervisor: supervisor.as_deref(),
        },
        env.as_mut(),
    )
    .map_err(|e| CliError::Runtime(format!("task {}: {e}", task.id)))?;
    tracing::info!(
        task = %task.id,
        termination = ?record.termination,
        turns = record.turns.len(),
        "trajectory done"
    );
    Ok(record)
}

/// Runs `job` over `tasks` on up to `parallelism` threads and hands results
/// to `sink` in task order.
fn execute_ordered<J, S>(
    tasks: &[&TaskInstance],
    parallelism: usize,
    job: J,
    mut sink: S,
) -> Result<(), CliError>
where
    J: Fn(&TaskInstance) -> Result<TrajectoryRecord, CliError> + Sync,
    S: FnMut(TrajectoryRecord) -> Result<(), CliError>,
{
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = parallelism.min(tasks.len()).max(1);
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<(usize, Result<TrajectoryRecord, CliError>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort, job) = (&next, &abort, &job);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { break };
                if tx.send((i, job(task))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut expected = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&expected) {
                expected += 1;
                if let Err(e) = result.and_then(&mut sink) {
                    abort.store(true, Ordering::Relaxed);
                    return Err(e);
                }
            }
        }
        Ok(())
    })
}

fn run_prepared(prepared: &Prepared, verify_interval: Option<u32>) -> Result<RunSummary, CliError> {
    let config = prepared.config.run_config(verify_interval)?;
    let label = run_label(&config);
    let dir = prepared.out_root.join(&label);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let log_path = dir.join(TRAJECTORIES_FILE);

    let mut records = if log_path.exists() {
        read_trajectories(&log_path).map_err(|e| CliError::Input(e.to_string()))?
    } else {
        Vec::new()
    };
    let done: HashSet<&str> = records.iter().map(|r| r.task_id.as_str()).collect();
    let todo: Vec<&TaskInstance> = prepared
        .tasks
        .iter()
        .filter(|t| !done.contains(t.id.as_str()))
        .collect();
    if todo.len() < prepared.tasks.len() {
        tracing::info!(skipped = prepared.tasks.len() - todo.len(), "resuming run");
    }

    let mut writer =
        TrajectoryWriter::append(&log_path).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut fresh = Vec::new();
    execute_ordered(
        &todo,
        prepared.parallelism,
        |task| run_one(prepared, &config, task),
        |record| {
            writer
                .write(&record)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            fresh.push(record);
            Ok(())
        },
    )?;
    let new_records = fresh.len();
    records.extend(fresh);
    Ok(RunSummary::from_records(
        label,
        &config,
        log_path,
        &records,
        new_records,
    ))
}

/// Runs every task once under the configured architecture.
pub fn cmd_run(opts: &RunOptions) -> Result<RunSummary, CliError> {
    let prepared = prepare(opts)?;
    run_prepared(&prepared, None)
}

/// One run per verification interval in the sweep list, plus `sweep.csv`
/// with one row per run.
pub fn cmd_sweep(opts: &RunOptions) -> Result<Vec<RunSummary>, CliError> {
    let prepared = prepare(opts)?;
    let values = prepared.config.sweep_values()?.to_vec();
    // Check every interval before producing any output.
    for &k in &values {
        prepared.config.run_config(Some(k))?;
    }
    let mut summaries = Vec::with_capacity(values.len());
    for k in values {
        summaries.push(run_prepared(&prepared, Some(k))?);
    }
    let path = prepared.out_root.join(SWEEP_FILE);
    fs::write(&path, sweep_csv(&summaries)).map_err(|e| CliError::io(&path, e))?;
    Ok(summaries)
}

pub const SWEEP_COLUMNS: &str =
    "label,architecture,verify_interval,tasks,mean_score,success_rate,total_cost_usd,total_energy_j,mean_max_kv_bytes";

pub fn sweep_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from(SWEEP_COLUMNS);
    out.push('\n');
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.label,
            s.architecture,
            s.verify_interval,
            s.tasks,
            s.mean_score,
            s.success_rate,
            s.total_cost,
            s.total_energy_joules,
            s.mean_max_kv_bytes
        ));
    }
    out
}
