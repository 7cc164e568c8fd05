//! Four-part YAML prompt assembly and generation-task manifests.
//!
//! A prompt has exactly four sections, in order: repository context,
//! class context, target (signature plus verbatim documentation), and the
//! versioned instruction template.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::index::{self, SkeletonCorpus};

pub const INSTRUCTION_TEMPLATE: &str = include_str!("../resources/instruction_v1.md");
pub const INSTRUCTION_VERSION: &str = "v1";

/// SHA-256 of the instruction template, recorded in run metadata so
/// prompt-scheme comparisons stay attributable.
pub fn instruction_hash() -> String {
    let digest = Sha256::digest(INSTRUCTION_TEMPLATE.as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTask {
    pub task_id: String,
    pub project: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bug_id: Option<String>,
    pub class_fqn: String,
    pub method_signature: String,
    /// Natural-language doc, verbatim including `@param`/`@return` tags.
    pub nl_doc: String,
    pub source_path: String,
}

/// One record of the on-disk manifest (`tasks.jsonl`).
#[derive(Debug, Serialize, Deserialize)]
struct ManifestRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task_id: Option<String>,
    project: String,
    #[serde(default)]
    bug_id: Option<String>,
    class_fqn: String,
    method_signature: String,
    source_path: String,
    doc: String,
}

#[derive(Debug, Serialize)]
struct TargetSection<'a> {
    method_signature: &'a str,
    documentation: &'a str,
}

#[derive(Debug, Serialize)]
struct PromptYaml<'a> {
    repository_context: &'a [String],
    class_context: &'a str,
    target: TargetSection<'a>,
    instruction: &'a str,
}

#[derive(Debug, Clone)]
pub struct PromptDoc {
    pub repo_context: Vec<String>,
    pub class_context: String,
    pub target_signature: String,
    pub target_doc: String,
    pub instruction: String,
    pub serialized: String,
    /// Set when the target class was not found in the corpus.
    pub class_missing: bool,
}

/// Assemble the four-section prompt for one task. Deterministic for a
/// fixed (task, corpus, config).
pub fn build_prompt(
    task: &GenerationTask,
    corpus: &SkeletonCorpus,
    top_m: usize,
    char_budget: usize,
) -> PromptDoc {
    let (query, class_missing) = index::build_query(&task.method_signature, &task.class_fqn, corpus);
    let class_context = query
        .target_class
        .as_deref()
        .and_then(|fqn| corpus.find(fqn))
        .map(index::render_skeleton)
        .unwrap_or_default();
    let repo_context: Vec<String> = corpus
        .retrieve(&query, top_m.saturating_add(1), char_budget)
        .into_iter()
        .filter(|s| Some(s.qualified_name.as_str()) != query.target_class.as_deref())
        .take(top_m)
        .map(index::render_skeleton)
        .collect();

    let yaml = PromptYaml {
        repository_context: &repo_context,
        class_context: &class_context,
        target: TargetSection {
            method_signature: &task.method_signature,
            documentation: &task.nl_doc,
        },
        instruction: INSTRUCTION_TEMPLATE,
    };
    let serialized = serde_yaml::to_string(&yaml).expect("prompt serialization");

    PromptDoc {
        repo_context,
        class_context,
        target_signature: task.method_signature.clone(),
        target_doc: task.nl_doc.clone(),
        instruction: INSTRUCTION_TEMPLATE.to_string(),
        serialized,
        class_missing,
    }
}

#[derive(Debug, Default)]
pub struct LoadStats {
    pub loaded: usize,
    /// Records dropped because they carry no NL doc.
    pub undocumented: usize,
}

/// Load a line-delimited task manifest. One task per (bug, method)
/// record; records without documentation are excluded and counted.
pub fn load_tasks(path: &Path) -> anyhow::Result<(Vec<GenerationTask>, LoadStats)> {
    let text = std::fs::read_to_string(path)?;
    let mut tasks = Vec::new();
    let mut stats = LoadStats::default();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(line).map_err(|e| {
            anyhow::anyhow!("{}:{}: malformed manifest record: {e}", path.display(), lineno + 1)
        })?;
        if rec.doc.trim().is_empty() {
            stats.undocumented += 1;
            continue;
        }
        let task_id = rec.task_id.clone().unwrap_or_else(|| {
            let bug = rec.bug_id.as_deref().unwrap_or("0");
            format!("{}-{}-{}", rec.project, bug, tasks.len() + 1)
        });
        tasks.push(GenerationTask {
            task_id,
            project: rec.project,
            bug_id: rec.bug_id,
            class_fqn: rec.class_fqn,
            method_signature: rec.method_signature,
            nl_doc: rec.doc,
            source_path: rec.source_path,
        });
        stats.loaded += 1;
    }
    Ok((tasks, stats))
}

pub fn save_tasks(tasks: &[GenerationTask], path: &Path) -> anyhow::Result<()> {
    let mut out = String::new();
    for t in tasks {
        let rec = ManifestRecord {
            task_id: Some(t.task_id.clone()),
            project: t.project.clone(),
            bug_id: t.bug_id.clone(),
            class_fqn: t.class_fqn.clone(),
            method_signature: t.method_signature.clone(),
            source_path: t.source_path.clone(),
            doc: t.nl_doc.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a prompt as `<task_id>.prompt.yaml` under `dir`.
pub fn save_prompt(task: &GenerationTask, prompt: &PromptDoc, dir: &Path) -> anyhow::Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{}.prompt.yaml", task.task_id));
    std::fs::write(&path, &prompt.serialized)?;
    Ok(path)
}
