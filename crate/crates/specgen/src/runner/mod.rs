//! Validation runner: checks out fixed and buggy versions, injects a
//! candidate postcondition, compiles and tests each copy, and classifies
//! the candidate. Outcomes are appended to a line-delimited results log
//! so interrupted batches can resume.

pub mod adapter;
pub mod expr;
pub mod mock;

use std::collections::{HashMap, HashSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::inject;
use crate::metrics::{SampleFlags, TaskOutcomes};
use crate::prompt::GenerationTask;
use crate::spec_io::{CandidateId, SpecCandidate};
use adapter::{Adapter, Version};

#[derive(Debug, Clone)]
pub struct RunnerOptions {
    pub work_root: PathBuf,
    pub log_dir: PathBuf,
    pub compile_timeout: Duration,
    pub test_timeout: Duration,
    /// Restrict test runs to tests relevant to the modified class when
    /// the adapter supports it.
    pub relevant_tests: bool,
    pub jobs: usize,
}

impl RunnerOptions {
    pub fn new(work_root: impl Into<PathBuf>, log_dir: impl Into<PathBuf>) -> Self {
        RunnerOptions {
            work_root: work_root.into(),
            log_dir: log_dir.into(),
            compile_timeout: Duration::from_secs(300),
            test_timeout: Duration::from_secs(1200),
            relevant_tests: false,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub task_id: String,
    pub sample: u32,
    pub project: String,
    pub bug_id: String,
    pub syntax_ok: bool,
    pub semantic_ok: bool,
    pub bug_distinguishing: bool,
    /// True when a buggy-version failure message carried this candidate's
    /// marker, i.e. the failure is attributable to the postcondition.
    pub failure_attributed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harness_error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logs: Vec<String>,
}

impl ValidationOutcome {
    fn blank(task: &GenerationTask, sample: u32) -> Self {
        ValidationOutcome {
            task_id: task.task_id.clone(),
            sample,
            project: task.project.clone(),
            bug_id: task.bug_id.clone().unwrap_or_default(),
            syntax_ok: false,
            semantic_ok: false,
            bug_distinguishing: false,
            failure_attributed: false,
            harness_error: None,
            notes: Vec::new(),
            logs: Vec::new(),
        }
    }

    pub fn candidate_id(&self) -> CandidateId {
        CandidateId { task_id: self.task_id.clone(), sample: self.sample }
    }

    pub fn bug_key(&self) -> (String, String) {
        (self.project.clone(), self.bug_id.clone())
    }

    pub fn flags(&self) -> SampleFlags {
        SampleFlags {
            syntax_ok: self.syntax_ok,
            semantic_ok: self.semantic_ok,
            bug_distinguishing: self.bug_distinguishing,
        }
    }

    fn assert_chain(&self) {
        assert!(
            self.flags().chain_holds(),
            "flag implication chain violated for {}/{}",
            self.task_id,
            self.sample
        );
    }
}

/// One unit of validation work: a task plus one parsed (or unparseable)
/// sample for it.
#[derive(Debug, Clone)]
pub struct ValidationJob {
    pub task: GenerationTask,
    pub sample: u32,
    /// `None` means the model output failed spec parsing; the outcome is
    /// all-false without touching the adapter.
    pub candidate: Option<SpecCandidate>,
    pub parse_error: Option<String>,
}

/// Inject `spec` into the task's source file inside `copy`, in place.
fn inject_into_copy(
    copy_root: &Path,
    task: &GenerationTask,
    spec: &SpecCandidate,
    marker: &str,
) -> anyhow::Result<inject::InstrumentedFile> {
    let path = copy_root.join(&task.source_path);
    let source = std::fs::read_to_string(&path)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
    let site = inject::locate_method(&source, &task.class_fqn, &task.method_signature)
        .map_err(|e| anyhow::anyhow!("locating {}: {e}", task.method_signature))?;
    let file = inject::instrument(&source, &site, spec, marker)
        .map_err(|e| anyhow::anyhow!("instrumenting {}: {e}", task.method_signature))?;
    std::fs::write(&path, &file.rewritten)?;
    Ok(file)
}

fn write_log(dir: &Path, name: &str, content: &str) -> anyhow::Result<String> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, content)?;
    Ok(path.to_string_lossy().into_owned())
}

/// Run the full classification pipeline for one candidate. Infrastructure
/// failures set `harness_error` and leave unresolved flags false; the
/// implication chain is asserted before returning.
pub fn validate_candidate(
    job: &ValidationJob,
    adapter: &dyn Adapter,
    opts: &RunnerOptions,
) -> ValidationOutcome {
    let mut outcome = ValidationOutcome::blank(&job.task, job.sample);
    let spec = match &job.candidate {
        Some(spec) => spec,
        None => {
            outcome
                .notes
                .push(format!("parse failure: {}", job.parse_error.as_deref().unwrap_or("unknown")));
            outcome.assert_chain();
            return outcome;
        }
    };
    let marker = inject::marker_for(&job.task.task_id, job.sample);
    let slug = format!("{}/{}", job.task.task_id, job.sample);
    let work = opts.work_root.join(&slug);
    let logs = opts.log_dir.join(&slug);
    let relevant = opts.relevant_tests.then_some(job.task.class_fqn.as_str());

    match run_version(job, spec, &marker, adapter, opts, Version::Fixed, &work, &logs, relevant) {
        Ok(VersionResult::HarnessError(reason)) => {
            outcome.harness_error = Some(reason);
        }
        Ok(VersionResult::CompileFailed(log)) => {
            outcome.logs.push(log);
        }
        Ok(VersionResult::TestsFailed { log, .. }) => {
            outcome.syntax_ok = true;
            outcome.logs.push(log);
        }
        Ok(VersionResult::Passed(log)) => {
            outcome.syntax_ok = true;
            outcome.semantic_ok = true;
            outcome.logs.push(log);
        }
        Err(e) => outcome.harness_error = Some(e.to_string()),
    }

    if outcome.semantic_ok {
        match run_version(job, spec, &marker, adapter, opts, Version::Buggy, &work, &logs, relevant)
        {
            Ok(VersionResult::HarnessError(reason)) => {
                outcome.harness_error = Some(reason);
            }
            Ok(VersionResult::CompileFailed(log)) => {
                // fix may have changed signatures; the spec cannot be
                // evaluated on the buggy version
                outcome.notes.push("buggy version did not compile".into());
                outcome.logs.push(log);
            }
            Ok(VersionResult::TestsFailed { attributed, log }) => {
                outcome.failure_attributed = attributed;
                outcome.bug_distinguishing = attributed;
                outcome.logs.push(log);
            }
            Ok(VersionResult::Passed(log)) => {
                outcome.logs.push(log);
            }
            Err(e) => outcome.harness_error = Some(e.to_string()),
        }
    }

    outcome.assert_chain();
    outcome
}

enum VersionResult {
    HarnessError(String),
    CompileFailed(String),
    TestsFailed { attributed: bool, log: String },
    Passed(String),
}

#[allow(clippy::too_many_arguments)]
fn run_version(
    job: &ValidationJob,
    spec: &SpecCandidate,
    marker: &str,
    adapter: &dyn Adapter,
    opts: &RunnerOptions,
    version: Version,
    work: &Path,
    logs: &Path,
    relevant: Option<&str>,
) -> anyhow::Result<VersionResult> {
    let task = &job.task;
    let bug_id = task.bug_id.clone().unwrap_or_else(|| "0".into());
    let workdir = work.join(version.name());
    let copy = match adapter.checkout(&task.project, &bug_id, version, &workdir) {
        Ok(copy) => copy,
        Err(e) => return Ok(VersionResult::HarnessError(format!("checkout: {e}"))),
    };
    if let Err(e) = inject_into_copy(&copy.root, task, spec, marker) {
        return Ok(VersionResult::HarnessError(format!("inject: {e}")));
    }

    let compile = adapter.compile(&copy, opts.compile_timeout)?;
    let compile_log = write_log(logs, &format!("{}-compile.log", version.name()), &compile.output)?;
    if compile.timed_out {
        return Ok(VersionResult::HarnessError("timeout".into()));
    }
    if !compile.ok {
        return Ok(VersionResult::CompileFailed(compile_log));
    }

    let tests = adapter.test(&copy, relevant, opts.test_timeout)?;
    let test_log = write_log(logs, &format!("{}-test.log", version.name()), &tests.raw_log)?;
    if tests.timed_out {
        return Ok(VersionResult::HarnessError("timeout".into()));
    }
    if tests.passed() {
        Ok(VersionResult::Passed(test_log))
    } else {
        Ok(VersionResult::TestsFailed { attributed: tests.mentions(marker), log: test_log })
    }
}

/// Append-only results log.
pub fn append_outcome(path: &Path, outcome: &ValidationOutcome) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(outcome)?;
    writeln!(file, "{line}")?;
    Ok(())
}

pub fn load_outcomes(path: &Path) -> anyhow::Result<Vec<ValidationOutcome>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let outcome: ValidationOutcome = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), lineno + 1))?;
        out.push(outcome);
    }
    Ok(out)
}

/// Validate every job not already present in the results log, with up to
/// `opts.jobs` workers. Each worker uses a job-private working directory;
/// the log file is the only shared state.
pub fn run_batch(
    jobs: &[ValidationJob],
    adapter: &dyn Adapter,
    opts: &RunnerOptions,
    results_path: &Path,
) -> anyhow::Result<BatchSummary> {
    let done: HashSet<(String, u32)> = load_outcomes(results_path)?
        .into_iter()
        .map(|o| (o.task_id, o.sample))
        .collect();
    let pending: Vec<&ValidationJob> = jobs
        .iter()
        .filter(|j| !done.contains(&(j.task.task_id.clone(), j.sample)))
        .collect();
    let skipped = jobs.len() - pending.len();

    // candidates validated in parallel must never share a working copy
    let mut seen_dirs = HashSet::new();
    for job in &pending {
        let dir = opts.work_root.join(format!("{}/{}", job.task.task_id, job.sample));
        anyhow::ensure!(seen_dirs.insert(dir.clone()), "duplicate workdir {}", dir.display());
    }

    let queue = Mutex::new(pending.into_iter());
    let sink = Mutex::new(());
    let errors = Mutex::new(Vec::new());
    let completed = Mutex::new(0usize);
    let workers = opts.jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = match queue.lock().unwrap().next() {
                    Some(job) => job,
                    None => break,
                };
                let outcome = validate_candidate(job, adapter, opts);
                let _guard = sink.lock().unwrap();
                match append_outcome(results_path, &outcome) {
                    Ok(()) => *completed.lock().unwrap() += 1,
                    Err(e) => errors.lock().unwrap().push(e.to_string()),
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    anyhow::ensure!(errors.is_empty(), "results log writes failed: {}", errors.join("; "));
    Ok(BatchSummary { completed: completed.into_inner().unwrap(), skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSummary {
    pub completed: usize,
    pub skipped: usize,
}

/// Group raw outcomes into per-task rows for the metrics engine.
/// `reasoning_tokens` maps candidate ids to trace lengths (absent ids
/// count as 0). With `exclude_harness_errors`, harness-error samples are
/// dropped and the per-task sample count shrinks accordingly.
pub fn collect_task_outcomes(
    outcomes: &[ValidationOutcome],
    reasoning_tokens: &HashMap<(String, u32), usize>,
    exclude_harness_errors: bool,
) -> Vec<TaskOutcomes> {
    let mut by_task: HashMap<String, Vec<&ValidationOutcome>> = HashMap::new();
    for o in outcomes {
        by_task.entry(o.task_id.clone()).or_default().push(o);
    }
    let mut tasks: Vec<TaskOutcomes> = Vec::new();
    for (task_id, mut rows) in by_task {
        rows.sort_by_key(|o| o.sample);
        rows.dedup_by_key(|o| o.sample);
        if exclude_harness_errors {
            rows.retain(|o| o.harness_error.is_none());
            if rows.is_empty() {
                continue;
            }
        }
        let bug_key = rows[0].bug_key();
        let samples = rows.iter().map(|o| o.flags()).collect();
        let reasoning = rows
            .iter()
            .map(|o| {
                reasoning_tokens.get(&(o.task_id.clone(), o.sample)).copied().unwrap_or(0)
            })
            .collect();
        tasks.push(TaskOutcomes { task_id, bug_key, samples, reasoning_tokens: reasoning });
    }
    tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    tasks
}
