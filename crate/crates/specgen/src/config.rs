//! Run configuration: a single TOML file plus command-line overrides.
//! The effective config is echoed into report metadata so every result
//! records how it was produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::EndpointConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Root for working copies, logs, and intermediate artifacts.
    pub workspace: PathBuf,
    pub adapter: AdapterConfig,
    pub endpoint: EndpointConfig,
    pub retrieval: RetrievalConfig,
    /// k values reported by `score`.
    pub k_set: Vec<usize>,
    pub samples: u32,
    pub jobs: usize,
    pub timeout_compile_secs: u64,
    pub timeout_test_secs: u64,
    pub include_reasoning: bool,
    pub exclude_harness_errors: bool,
    pub relevant_tests: bool,
    /// Sample source: `stub` (deterministic, offline) or `http`.
    pub backend: String,
    pub stub_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            workspace: PathBuf::from("workspace"),
            adapter: AdapterConfig::default(),
            endpoint: EndpointConfig::default(),
            retrieval: RetrievalConfig::default(),
            k_set: vec![1, 5, 10],
            samples: 10,
            jobs: 1,
            timeout_compile_secs: 300,
            timeout_test_secs: 1200,
            include_reasoning: false,
            exclude_harness_errors: false,
            relevant_tests: false,
            backend: "stub".into(),
            stub_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterConfig {
    /// One of `mock`, `defects4j`, `generic`.
    pub kind: String,
    /// Mock adapter: directory holding `fixed/`, `buggy/`, and
    /// `mock_tests.json`.
    pub mock_root: Option<PathBuf>,
    /// Generic adapter command templates.
    pub checkout_cmd: Option<String>,
    pub compile_cmd: Option<String>,
    pub test_cmd: Option<String>,
    pub relevant_test_cmd: Option<String>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            kind: "mock".into(),
            mock_root: None,
            checkout_cmd: None,
            compile_cmd: None,
            test_cmd: None,
            relevant_test_cmd: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub top_m: usize,
    pub char_budget: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig { top_m: 5, char_budget: 12_000 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("reading config {}: {e}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("parsing config {}: {e}", path.display()))?;
        Ok(config)
    }

    /// Flat key/value echo for report metadata.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        meta.insert("workspace".into(), self.workspace.display().to_string());
        meta.insert("adapter".into(), self.adapter.kind.clone());
        meta.insert(
            "k_set".into(),
            self.k_set.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        );
        meta.insert("samples".into(), self.samples.to_string());
        meta.insert("jobs".into(), self.jobs.to_string());
        meta.insert("timeout_compile_secs".into(), self.timeout_compile_secs.to_string());
        meta.insert("timeout_test_secs".into(), self.timeout_test_secs.to_string());
        meta.insert("include_reasoning".into(), self.include_reasoning.to_string());
        meta.insert("exclude_harness_errors".into(), self.exclude_harness_errors.to_string());
        meta.insert("relevant_tests".into(), self.relevant_tests.to_string());
        meta.insert("retrieval_top_m".into(), self.retrieval.top_m.to_string());
        meta.insert("retrieval_char_budget".into(), self.retrieval.char_budget.to_string());
        meta.insert("backend".into(), self.backend.clone());
        meta.insert("instruction_hash".into(), crate::prompt::instruction_hash());
        meta
    }
}
