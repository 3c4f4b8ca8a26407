//! Experiment configuration file (TOML).
//!
//! Relative paths are resolved against the directory holding the config
//! file. Credentials never appear in the file; HTTP backends name the
//! environment variable that holds the key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hymas_core::backends::ScriptEntry;
use hymas_core::{
    Architecture, KvGeometry, ModelProfile, Placement, Pricing, RunConfig, Sampling,
    DEFAULT_EFFICIENCY_OPS_PER_JOULE,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub models: BTreeMap<String, ModelSection>,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendSection>,
    pub dataset: PathBuf,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default)]
    pub sweep: Option<Vec<u32>>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub environment: EnvironmentSection,
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub architecture: Architecture,
    #[serde(default)]
    pub max_turns: Option<u32>,
    #[serde(default = "default_verify_interval")]
    pub verify_interval: u32,
    /// Key into `[models]`.
    pub executor: String,
    #[serde(default)]
    pub supervisor: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_generated")]
    pub max_generated_tokens: u32,
}

fn default_verify_interval() -> u32 {
    1
}

fn default_max_generated() -> u32 {
    Sampling::default().max_generated_tokens
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub placement: Placement,
    /// Key into `[backends]`.
    pub backend: String,
    pub context_cap: u64,
    #[serde(default)]
    pub param_count: Option<f64>,
    /// Edge only; defaults to 1.5e12 ops/J.
    #[serde(default)]
    pub efficiency: Option<f64>,
    #[serde(default)]
    pub kv: Option<KvGeometry>,
    /// Cloud only; defaults to GPT-4o list prices.
    #[serde(default)]
    pub pricing: Option<Pricing>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSection {
    Http {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
    /// Replays canned replies. Each task gets a fresh copy of the script:
    /// `<script_dir>/<task id>.json` when present, else `script` or the
    /// inline `entries`.
    Scripted {
        #[serde(default)]
        script: Option<PathBuf>,
        #[serde(default)]
        script_dir: Option<PathBuf>,
        #[serde(default)]
        entries: Option<Vec<ScriptEntry>>,
    },
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    3
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSection {
    #[default]
    Wikienv,
    Scripted {
        script: PathBuf,
    },
}

impl EnvironmentSection {
    pub fn id(&self) -> &'static str {
        match self {
            EnvironmentSection::Wikienv => "wikienv",
            EnvironmentSection::Scripted { .. } => "scripted",
        }
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads and validates `path`, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        fix(&mut self.output);
        if let Some(c) = &mut self.corpus {
            fix(c);
        }
        if let EnvironmentSection::Scripted { script } = &mut self.environment {
            fix(script);
        }
        for backend in self.backends.values_mut() {
            if let BackendSection::Scripted {
                script, script_dir, ..
            } = backend
            {
                if let Some(s) = script {
                    fix(s);
                }
                if let Some(d) = script_dir {
                    fix(d);
                }
            }
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.parallelism == 0 {
            return Err(config_error("parallelism must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.contains(&0) {
                return Err(config_error("sweep values must be at least 1"));
            }
        }
        for (name, model) in &self.models {
            if !self.backends.contains_key(&model.backend) {
                return Err(config_error(format!(
                    "model '{name}' references unknown backend '{}'",
                    model.backend
                )));
            }
        }
        for (name, backend) in &self.backends {
            if let BackendSection::Scripted {
                script: None,
                script_dir: None,
                entries: None,
            } = backend
            {
                return Err(config_error(format!(
                    "scripted backend '{name}' needs script, script_dir, or entries"
                )));
            }
        }
        if matches!(self.environment, EnvironmentSection::Wikienv) && self.corpus.is_none() {
            return Err(config_error("the wikienv environment needs a corpus path"));
        }
        self.run_config(None)?;
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelSection, CliError> {
        self.models
            .get(name)
            .ok_or_else(|| config_error(format!("unknown model '{name}'")))
    }

    pub fn profile(&self, name: &str) -> Result<ModelProfile, CliError> {
        let m = self.model(name)?;
        let edge = m.placement == Placement::Edge;
        Ok(ModelProfile {
            name: name.to_string(),
            placement: m.placement,
            param_count: m.param_count,
            kv: m.kv,
            efficiency: m
                .efficiency
                .or(edge.then_some(DEFAULT_EFFICIENCY_OPS_PER_JOULE)),
            pricing: m.pricing.or((!edge).then_some(Pricing::GPT4O)),
            context_cap: m.context_cap,
        })
    }

    /// The per-trajectory config, optionally with `T_v` overridden.
    pub fn run_config(&self, verify_interval: Option<u32>) -> Result<RunConfig, CliError> {
        let run = &self.run;
        let supervisor = match (&run.supervisor, run.architecture.needs_supervisor()) {
            (Some(name), true) => Some(self.profile(name)?),
            (Some(_), false) => {
                return Err(config_error(format!(
                    "architecture {} takes no supervisor model",
                    run.architecture
                )))
            }
            (None, _) => None,
        };
        let config = RunConfig {
            architecture: run.architecture,
            max_turns: run.max_turns,
            verify_interval: verify_interval.unwrap_or(run.verify_interval),
            executor: self.profile(&run.executor)?,
            supervisor,
            environment_id: self.environment.id().to_string(),
            seed: run.seed,
            sampling: Sampling {
                temperature: run.temperature,
                max_generated_tokens: run.max_generated_tokens,
            },
        };
        config.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }

    pub fn sweep_values(&self) -> Result<&[u32], CliError> {
        if self.run.architecture == Architecture::Monolithic {
            return Err(config_error(
                "a monolithic run has no verification interval to sweep",
            ));
        }
        match self.sweep.as_deref() {
            None => Err(config_error("config has no sweep list")),
            Some([]) => Err(config_error("sweep list is empty")),
            Some(values) => Ok(values),
        }
    }
}
