//! Sampling from a chat-completions endpoint, or from a deterministic
//! stub for hermetic runs.
//!
//! One logical request per sample keeps the API surface minimal and the
//! sample order well-defined. Raw outputs are flushed to disk before any
//! parsing happens.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_samples: u32,
    pub request_timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "qwen2.5-coder-7b-instruct".into(),
            api_key_env: "SPECGEN_API_KEY".into(),
            temperature: 0.8,
            max_tokens: 4096,
            n_samples: 10,
            request_timeout_secs: 120,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleSet {
    pub task_id: String,
    /// Raw model outputs in generation order; length = n_samples.
    pub raws: Vec<String>,
    pub usage: Vec<Usage>,
    pub endpoint_meta: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("API key env var {0} is not set")]
    MissingKey(String),
    #[error("generation failed for sample {sample}: {message}")]
    Request { sample: u32, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Where samples come from. The stub never opens a connection.
pub enum ModelClient {
    Http(EndpointConfig),
    Stub(StubBackend),
}

impl ModelClient {
    pub fn describe(&self) -> BTreeMap<String, String> {
        let mut meta = BTreeMap::new();
        match self {
            ModelClient::Http(cfg) => {
                meta.insert("backend".into(), "http".into());
                meta.insert("base_url".into(), cfg.base_url.clone());
                meta.insert("model".into(), cfg.model.clone());
                meta.insert("temperature".into(), cfg.temperature.to_string());
            }
            ModelClient::Stub(stub) => {
                meta.insert("backend".into(), "stub".into());
                meta.insert("seed".into(), stub.seed.to_string());
            }
        }
        meta
    }

    /// Obtain exactly `n_samples` raw outputs for one prompt. Each raw
    /// text is written to `<raw_dir>/<task_id>/<sample>.raw.txt` as soon
    /// as it arrives.
    pub fn generate(
        &self,
        n_samples: u32,
        task_id: &str,
        prompt: &str,
        raw_dir: Option<&Path>,
    ) -> Result<SampleSet, GenerateError> {
        if n_samples == 0 {
            return Err(GenerateError::Config("n_samples must be >= 1".into()));
        }
        let mut raws = Vec::with_capacity(n_samples as usize);
        let mut usage = Vec::with_capacity(n_samples as usize);
        for sample in 1..=n_samples {
            let (raw, used) = match self {
                ModelClient::Http(cfg) => http_sample(cfg, prompt, sample)?,
                ModelClient::Stub(stub) => (stub.sample(task_id, sample, prompt), Usage::default()),
            };
            if let Some(dir) = raw_dir {
                persist_raw(dir, task_id, sample, &raw)?;
            }
            raws.push(raw);
            usage.push(used);
        }
        Ok(SampleSet {
            task_id: task_id.to_string(),
            raws,
            usage,
            endpoint_meta: self.describe(),
        })
    }
}

pub fn raw_sample_path(raw_dir: &Path, task_id: &str, sample: u32) -> PathBuf {
    raw_dir.join(task_id).join(format!("{sample}.raw.txt"))
}

fn persist_raw(dir: &Path, task_id: &str, sample: u32, raw: &str) -> std::io::Result<()> {
    let path = raw_sample_path(dir, task_id, sample);
    std::fs::create_dir_all(path.parent().unwrap())?;
    std::fs::write(path, raw)
}

#[derive(Debug, Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
    n: u32,
}

#[derive(Debug, Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: MessageBody,
}

#[derive(Debug, Deserialize)]
struct MessageBody {
    content: String,
}

#[derive(Debug, Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// One request with exponential backoff on transient failures.
fn http_sample(
    cfg: &EndpointConfig,
    prompt: &str,
    sample: u32,
) -> Result<(String, Usage), GenerateError> {
    let key = std::env::var(&cfg.api_key_env)
        .map_err(|_| GenerateError::MissingKey(cfg.api_key_env.clone()))?;
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(cfg.request_timeout_secs))
        .build()
        .map_err(|e| GenerateError::Config(e.to_string()))?;
    let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
    let body = ChatRequest {
        model: &cfg.model,
        messages: [ChatMessage { role: "user", content: prompt }],
        temperature: cfg.temperature,
        max_tokens: cfg.max_tokens,
        n: 1,
    };

    let mut last_err = String::new();
    for attempt in 0..=cfg.max_retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis(500 * (1 << (attempt - 1)) as u64));
        }
        let resp = client.post(&url).bearer_auth(&key).json(&body).send();
        match resp {
            Ok(r) if r.status().is_success() => {
                let parsed: ChatResponse = r
                    .json()
                    .map_err(|e| GenerateError::Request { sample, message: e.to_string() })?;
                let choice = parsed.choices.into_iter().next().ok_or_else(|| {
                    GenerateError::Request { sample, message: "empty choices".into() }
                })?;
                let usage = parsed
                    .usage
                    .map(|u| Usage {
                        prompt_tokens: u.prompt_tokens,
                        completion_tokens: u.completion_tokens,
                    })
                    .unwrap_or_default();
                return Ok((choice.message.content, usage));
            }
            Ok(r) => {
                let status = r.status();
                last_err = format!("http {status}");
                // client errors other than rate limiting will not recover
                if status.is_client_error() && status.as_u16() != 429 {
                    break;
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(GenerateError::Request { sample, message: format!("retries exhausted: {last_err}") })
}

/// Deterministic sample source: output depends only on (seed, task_id,
/// sample index), or cycles through a canned corpus when one is given.
pub struct StubBackend {
    pub seed: u64,
    pub canned: Vec<String>,
}

impl StubBackend {
    pub fn new(seed: u64) -> Self {
        StubBackend { seed, canned: Vec::new() }
    }

    pub fn with_canned(seed: u64, canned: Vec<String>) -> Self {
        StubBackend { seed, canned }
    }

    fn sample(&self, task_id: &str, sample: u32, _prompt: &str) -> String {
        if !self.canned.is_empty() {
            let idx = (sample as usize - 1) % self.canned.len();
            return self.canned[idx].clone();
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(task_id.as_bytes());
        hasher.update(sample.to_le_bytes());
        let digest = hasher.finalize();
        let mut rng = ChaCha8Rng::from_seed(digest.into());

        let conditions = [
            "ret != null",
            "ret >= 0",
            "true",
            "ret == x",
            "ret != null && ret.size() >= 0",
        ];
        let condition = conditions[rng.gen_range(0..conditions.len())];
        let with_ghost = rng.gen_bool(0.3);
        let mut out = String::new();
        out.push_str(&format!(
            "Let me analyze the target method for task {task_id}. The documentation \
             says the result should satisfy a basic shape constraint, so I will \
             check {condition}.\n\n"
        ));
        out.push_str("import: |\n");
        if with_ghost {
            out.push_str("pre-ghost: |\n  int ghostBefore = 0;\n");
        } else {
            out.push_str("pre-ghost: |\n");
        }
        out.push_str("post-ghost: |\n");
        out.push_str(&format!("condition: |\n  {condition}\n"));
        out
    }
}
