#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Setup {
    pub architecture: &'static str,
    pub verify_interval: u32,
    pub corpus: Option<PathBuf>,
    pub executor_dir: PathBuf,
    pub supervisor_script: PathBuf,
    pub sweep: Option<Vec<u32>>,
    pub parallelism: usize,
}

impl Setup {
    pub fn new(architecture: &'static str) -> Self {
        Self {
            architecture,
            verify_interval: 1,
            corpus: Some(fixtures().join("corpus.jsonl")),
            executor_dir: fixtures().join("executor"),
            supervisor_script: fixtures().join("supervisor.json"),
            sweep: None,
            parallelism: 2,
        }
    }

    /// Writes `config.toml` into `dir` and returns its path. Output goes to
    /// `dir/out`.
    pub fn write(&self, dir: &Path) -> PathBuf {
        let supervised = self.architecture != "monolithic";
        let mut toml = format!(
            r#"dataset = "{dataset}"
output = "out"
parallelism = {par}
"#,
            dataset = fixtures().join("tasks.jsonl").display(),
            par = self.parallelism,
        );
        if let Some(c) = &self.corpus {
            toml.push_str(&format!("corpus = \"{}\"\n", c.display()));
        }
        if let Some(s) = &self.sweep {
            toml.push_str(&format!("sweep = {s:?}\n"));
        }
        toml.push_str(&format!(
            r#"
[run]
architecture = "{arch}"
verify_interval = {tv}
executor = "edge"
seed = 3
"#,
            arch = self.architecture,
            tv = self.verify_interval,
        ));
        if supervised {
            toml.push_str("supervisor = \"cloud\"\n");
        }
        toml.push_str(&format!(
            r#"
[models.edge]
placement = "edge"
backend = "exec"
context_cap = 32768
param_count = 8e9
kv = {{ layers = 36, kv_heads = 8, head_dim = 128, bytes_per_activation = 2 }}

[models.cloud]
placement = "cloud"
backend = "sup"
context_cap = 128000

[backends.exec]
kind = "scripted"
script_dir = "{exec}"

[backends.sup]
kind = "scripted"
script = "{sup}"
"#,
            exec = self.executor_dir.display(),
            sup = self.supervisor_script.display(),
        ));
        let path = dir.join("config.toml");
        std::fs::write(&path, toml).unwrap();
        path
    }
}
