//! Fine-tuning data pipeline: screen repositories for documentation and
//! test quality, curate spec+reasoning candidates from a model endpoint,
//! queue failed candidates for human review, and export SFT triples.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::index::SkeletonCorpus;
use crate::model::ModelClient;
use crate::prompt::{self, GenerationTask};
use crate::runner::ValidationOutcome;
use crate::spec_io::{self, CandidateId, SpecCandidate};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityThresholds {
    pub doc_coverage: f64,
    pub require_tests: bool,
    pub require_clean_build: bool,
}

impl Default for QualityThresholds {
    fn default() -> Self {
        QualityThresholds { doc_coverage: 0.6, require_tests: true, require_clean_build: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QualityReport {
    pub repo_id: String,
    pub doc_coverage: f64,
    pub public_methods: usize,
    pub documented_public_methods: usize,
    pub has_tests: bool,
    pub builds_clean: bool,
    pub accepted: bool,
    pub reasons: Vec<String>,
}

/// Screen a repository for SFT suitability. `builds_clean` is probed by
/// the caller (adapter compile on a pristine checkout) since building is
/// adapter-specific. Doc coverage counts public methods carrying a doc
/// comment, over the extracted skeleton corpus.
pub fn quality_filter(
    repo_root: &Path,
    repo_id: &str,
    thresholds: &QualityThresholds,
    builds_clean: bool,
) -> anyhow::Result<QualityReport> {
    let (corpus, _) = crate::index::extract_skeletons(repo_root, &[], &[])?;
    let (public_methods, documented) = doc_counts(&corpus);
    let doc_coverage = if public_methods == 0 {
        0.0
    } else {
        documented as f64 / public_methods as f64
    };
    let has_tests = has_test_sources(repo_root);

    let mut reasons = Vec::new();
    if doc_coverage < thresholds.doc_coverage {
        reasons.push(format!(
            "lacks comprehensive documentation: doc coverage {doc_coverage:.2} below {:.2}",
            thresholds.doc_coverage
        ));
    }
    if thresholds.require_tests && !has_tests {
        reasons.push("lacks robust test coverage: no tests found".into());
    }
    if thresholds.require_clean_build && !builds_clean {
        reasons.push("build is not clean".into());
    }
    Ok(QualityReport {
        repo_id: repo_id.to_string(),
        doc_coverage,
        public_methods,
        documented_public_methods: documented,
        has_tests,
        builds_clean,
        accepted: reasons.is_empty(),
        reasons,
    })
}

fn doc_counts(corpus: &SkeletonCorpus) -> (usize, usize) {
    let mut total = 0;
    let mut documented = 0;
    for skeleton in &corpus.skeletons {
        for method in &skeleton.methods {
            if method.modifiers.iter().any(|m| m == "public") {
                total += 1;
                if method.doc.is_some() {
                    documented += 1;
                }
            }
        }
    }
    (total, documented)
}

fn has_test_sources(repo_root: &Path) -> bool {
    for entry in walkdir::WalkDir::new(repo_root).into_iter().flatten() {
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|e| e == "java") {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            if name.ends_with("Test") || name.ends_with("Tests") || name.starts_with("Test") {
                return true;
            }
            let in_test_dir = path.components().any(|c| {
                matches!(c.as_os_str().to_str(), Some("test") | Some("tests"))
            });
            if in_test_dir {
                return true;
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Pending,
    Passed,
    Failed,
    Approved,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub repo: String,
    pub method: String,
    pub status: ValidationStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer_note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub prompt: String,
    pub reasoning: String,
    /// The four-key spec block.
    pub postcondition: String,
    pub provenance: Provenance,
}

#[derive(Debug, Default)]
pub struct CurationReport {
    pub candidates: Vec<(GenerationTask, SpecCandidate, String /* serialized prompt */)>,
    /// (task id, reason) for tasks skipped by endpoint or parse failure.
    pub flagged: Vec<(String, String)>,
}

/// Draw one candidate per task from the endpoint; endpoint or parse
/// failures flag the task and the pipeline continues.
pub fn curate(
    tasks: &[GenerationTask],
    corpus: &SkeletonCorpus,
    client: &ModelClient,
    top_m: usize,
    char_budget: usize,
    raw_dir: Option<&Path>,
) -> CurationReport {
    let mut report = CurationReport::default();
    for task in tasks {
        let prompt = prompt::build_prompt(task, corpus, top_m, char_budget);
        let samples = match client.generate(1, &task.task_id, &prompt.serialized, raw_dir) {
            Ok(s) => s,
            Err(e) => {
                report.flagged.push((task.task_id.clone(), format!("generation: {e}")));
                continue;
            }
        };
        let id = CandidateId { task_id: task.task_id.clone(), sample: 1 };
        match spec_io::parse_model_output(&samples.raws[0], id) {
            Ok(candidate) => report.candidates.push((task.clone(), candidate, prompt.serialized)),
            Err(e) => report.flagged.push((task.task_id.clone(), format!("parse: {e}"))),
        }
    }
    report
}

/// One editable review-queue entry: everything a reviewer needs to refine
/// a failed candidate, plus an `approved` field they can flip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub task_id: String,
    pub sample: u32,
    pub prompt: String,
    pub reasoning: String,
    pub spec: String,
    pub failure_stage: String,
    #[serde(default)]
    pub failure_logs: Vec<String>,
    pub approved: bool,
    #[serde(default)]
    pub reviewer_note: String,
}

fn failure_stage(outcome: &ValidationOutcome) -> Option<&'static str> {
    if outcome.harness_error.is_some() {
        Some("harness")
    } else if !outcome.syntax_ok {
        Some("compile")
    } else if !outcome.semantic_ok {
        Some("test")
    } else {
        None
    }
}

/// Write one review file per failed candidate into `queue_dir`. Passed
/// candidates (semantic_ok) are left out. Returns the written paths.
pub fn build_review_queue(
    outcomes: &[ValidationOutcome],
    candidates: &HashMap<(String, u32), (SpecCandidate, String /* prompt */)>,
    queue_dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(queue_dir)?;
    let mut written = Vec::new();
    for outcome in outcomes {
        let Some(stage) = failure_stage(outcome) else { continue };
        let key = (outcome.task_id.clone(), outcome.sample);
        let (candidate, prompt) = match candidates.get(&key) {
            Some(pair) => pair,
            None => continue,
        };
        let entry = ReviewEntry {
            task_id: outcome.task_id.clone(),
            sample: outcome.sample,
            prompt: prompt.clone(),
            reasoning: candidate.reasoning.clone(),
            spec: spec_io::serialize_candidate(&SpecCandidate {
                reasoning: String::new(),
                ..candidate.clone()
            }),
            failure_stage: stage.to_string(),
            failure_logs: outcome.logs.clone(),
            approved: false,
            reviewer_note: String::new(),
        };
        let path = queue_dir.join(format!("{}-{}.review.yaml", outcome.task_id, outcome.sample));
        std::fs::write(&path, serde_yaml::to_string(&entry)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_review_queue(queue_dir: &Path) -> anyhow::Result<Vec<ReviewEntry>> {
    let mut entries = Vec::new();
    if !queue_dir.is_dir() {
        return Ok(entries);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(queue_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.to_string_lossy().ends_with(".review.yaml"))
        .collect();
    paths.sort();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let entry: ReviewEntry = serde_yaml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Serialize, Deserialize)]
struct SftRecord {
    prompt: String,
    completion: String,
    meta: SftMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct SftMeta {
    repo: String,
    method: String,
    status: ValidationStatus,
}

/// Export validated triples as line-delimited `{prompt, completion,
/// meta}` records, sorted by (repo, method). With `include_reasoning`
/// the completion is the reasoning trace, a blank line, then the spec;
/// otherwise the spec alone. Any non-passed, non-approved triple aborts
/// the export.
pub fn export_sft(
    triples: &[TrainingTriple],
    path: &Path,
    include_reasoning: bool,
) -> anyhow::Result<usize> {
    for triple in triples {
        match triple.provenance.status {
            ValidationStatus::Passed | ValidationStatus::Approved => {}
            status => anyhow::bail!(
                "triple {}::{} has status {:?}, not exportable",
                triple.provenance.repo,
                triple.provenance.method,
                status
            ),
        }
    }
    let mut ordered: Vec<&TrainingTriple> = triples.iter().collect();
    ordered.sort_by(|a, b| {
        (&a.provenance.repo, &a.provenance.method).cmp(&(&b.provenance.repo, &b.provenance.method))
    });

    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::File::create(path)?;
    for triple in &ordered {
        let completion = if include_reasoning && !triple.reasoning.is_empty() {
            format!("{}\n\n{}", triple.reasoning, triple.postcondition)
        } else {
            triple.postcondition.clone()
        };
        let record = SftRecord {
            prompt: triple.prompt.clone(),
            completion,
            meta: SftMeta {
                repo: triple.provenance.repo.clone(),
                method: triple.provenance.method.clone(),
                status: triple.provenance.status,
            },
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(ordered.len())
}
