//! Command-line entry point: index → tasks → prompt → generate →
//! validate → score → analyze, plus the dataset subcommands.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::dataset::{self, QualityThresholds, ValidationStatus};
use crate::index::SkeletonCorpus;
use crate::metrics;
use crate::model::{ModelClient, StubBackend};
use crate::prompt::{self, GenerationTask};
use crate::runner::{self, adapter::Adapter, RunnerOptions, ValidationJob};
use crate::spec_io::{self, CandidateId};

#[derive(Parser)]
#[command(name = "specgen", version, about = "Postcondition generation and validation toolchain")]
pub struct Cli {
    /// Run configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a class-skeleton corpus from a Java repository.
    Index {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Include globs, relative to the repo root.
        #[arg(long)]
        include: Vec<String>,
        #[arg(long)]
        exclude: Vec<String>,
    },
    /// Load a task manifest, dropping undocumented methods.
    Tasks {
        /// Line-delimited manifest of (project, bug, class, method, doc).
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render prompts for every task.
    Prompt {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Sample model outputs for every task (resumable).
    Generate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        raw_dir: PathBuf,
        #[arg(long)]
        samples: Option<u32>,
    },
    /// Inject, compile, and test every candidate (resumable).
    Validate(ValidateArgs),
    /// Aggregate a results log into the metrics table.
    Score {
        #[arg(long)]
        results: PathBuf,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        raw_dir: Option<PathBuf>,
        #[arg(long)]
        exclude_harness_errors: bool,
    },
    /// Reasoning-length rank analysis (CSV on stdout).
    Analyze {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        raw_dir: PathBuf,
        #[arg(long)]
        exclude_harness_errors: bool,
    },
    /// Fine-tuning data pipeline.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    tasks: PathBuf,
    #[arg(long)]
    raw_dir: PathBuf,
    #[arg(long)]
    results: PathBuf,
    /// Adapter kind: mock, defects4j, or generic (overrides config).
    #[arg(long)]
    adapter: Option<String>,
    /// Restrict validation to the bug ids listed in this file (one per
    /// line, `project-bug` form).
    #[arg(long)]
    bugs: Option<PathBuf>,
    #[arg(long)]
    samples: Option<u32>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    timeout_compile: Option<u64>,
    #[arg(long)]
    timeout_test: Option<u64>,
    #[arg(long)]
    mock_root: Option<PathBuf>,
    #[arg(long)]
    relevant_tests: bool,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Screen a repository for documentation and test quality.
    Filter {
        #[arg(long)]
        repo: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        doc_coverage: Option<f64>,
        /// Assert the repo builds cleanly (caller-verified).
        #[arg(long)]
        builds_clean: bool,
    },
    /// Draw one spec+reasoning candidate per task.
    Curate {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Queue failed candidates for human review.
    Review {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        raw_dir: PathBuf,
        #[arg(long)]
        prompt_dir: PathBuf,
        #[arg(long)]
        queue_dir: PathBuf,
    },
    /// Export validated triples as SFT records.
    Export {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        raw_dir: PathBuf,
        #[arg(long)]
        prompt_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        include_reasoning: bool,
        /// Also export reviewer-approved entries from this queue.
        #[arg(long)]
        queue_dir: Option<PathBuf>,
    },
}

pub fn run() -> anyhow::Result<i32> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    dispatch(cli.command, config)?;
    Ok(0)
}

fn dispatch(command: Command, mut config: RunConfig) -> anyhow::Result<()> {
    match command {
        Command::Index { repo, out, include, exclude } => {
            let (corpus, report) = crate::index::extract_skeletons(&repo, &include, &exclude)?;
            corpus.save(&out)?;
            println!("{}", report.render());
            println!("indexed {} classes -> {}", corpus.skeletons.len(), out.display());
        }
        Command::Tasks { manifest, out } => {
            let (tasks, stats) = prompt::load_tasks(&manifest)?;
            prompt::save_tasks(&tasks, &out)?;
            println!(
                "loaded {} tasks ({} undocumented records dropped) -> {}",
                stats.loaded,
                stats.undocumented,
                out.display()
            );
        }
        Command::Prompt { tasks, corpus, out_dir } => {
            let (tasks, _) = prompt::load_tasks(&tasks)?;
            let corpus = SkeletonCorpus::load(&corpus)?;
            let mut missing = 0usize;
            for task in &tasks {
                let doc =
                    prompt::build_prompt(task, &corpus, config.retrieval.top_m, config.retrieval.char_budget);
                if doc.class_missing {
                    missing += 1;
                }
                prompt::save_prompt(task, &doc, &out_dir)?;
            }
            println!(
                "wrote {} prompts ({} with unindexed target class) -> {}",
                tasks.len(),
                missing,
                out_dir.display()
            );
        }
        Command::Generate { tasks, corpus, raw_dir, samples } => {
            if let Some(n) = samples {
                config.samples = n;
            }
            let (tasks, _) = prompt::load_tasks(&tasks)?;
            let corpus = SkeletonCorpus::load(&corpus)?;
            let client = make_client(&config);
            let mut generated = 0usize;
            let mut skipped = 0usize;
            for task in &tasks {
                // resumable: a task with all raw samples present is done
                let complete = (1..=config.samples)
                    .all(|s| raw_dir.join(&task.task_id).join(format!("{s}.raw.txt")).exists());
                if complete {
                    skipped += 1;
                    continue;
                }
                let doc =
                    prompt::build_prompt(task, &corpus, config.retrieval.top_m, config.retrieval.char_budget);
                client
                    .generate(config.samples, &task.task_id, &doc.serialized, Some(&raw_dir))
                    .with_context(|| format!("generating for {}", task.task_id))?;
                generated += 1;
            }
            println!("generated {generated} tasks, skipped {skipped} already complete");
        }
        Command::Validate(args) => validate(args, config)?,
        Command::Score { results, k, raw_dir, exclude_harness_errors } => {
            let outcomes = runner::load_outcomes(&results)?;
            anyhow::ensure!(!outcomes.is_empty(), "results log {} is empty", results.display());
            let k_set = if k.is_empty() { config.k_set.clone() } else { k };
            let reasoning = raw_dir
                .as_deref()
                .map(|dir| reasoning_tokens(&outcomes, dir))
                .unwrap_or_default();
            let tasks = runner::collect_task_outcomes(
                &outcomes,
                &reasoning,
                exclude_harness_errors || config.exclude_harness_errors,
            );
            let k_set = clamp_k_set(&k_set, &tasks)?;
            let report = metrics::build_report(&tasks, &k_set, config.metadata())?;
            println!("{}", report.render_table());
        }
        Command::Analyze { results, raw_dir, exclude_harness_errors } => {
            let outcomes = runner::load_outcomes(&results)?;
            let reasoning = reasoning_tokens(&outcomes, &raw_dir);
            let tasks = runner::collect_task_outcomes(
                &outcomes,
                &reasoning,
                exclude_harness_errors || config.exclude_harness_errors,
            );
            let k_set = clamp_k_set(&config.k_set, &tasks)?;
            let report = metrics::build_report(&tasks, &k_set, config.metadata())?;
            print!("{}", report.rank_series_csv());
        }
        Command::Dataset(cmd) => dataset_command(cmd, config)?,
    }
    Ok(())
}

/// Cap every requested k at the smallest per-task sample count (which
/// shrinks when harness-error samples are excluded), warning when a
/// value had to move.
fn clamp_k_set(k_set: &[usize], tasks: &[metrics::TaskOutcomes]) -> anyhow::Result<Vec<usize>> {
    let min_n = tasks.iter().map(|t| t.samples.len()).min().unwrap_or(0);
    anyhow::ensure!(min_n > 0, "no scorable samples after filtering");
    let mut clamped = Vec::new();
    for &k in k_set {
        let effective = k.min(min_n).max(1);
        if effective != k {
            eprintln!("warning: k={k} clamped to {effective} (smallest per-task sample count)");
        }
        if !clamped.contains(&effective) {
            clamped.push(effective);
        }
    }
    Ok(clamped)
}

fn make_client(config: &RunConfig) -> ModelClient {
    match config.backend.as_str() {
        "http" => ModelClient::Http(config.endpoint.clone()),
        _ => ModelClient::Stub(StubBackend::new(config.stub_seed)),
    }
}

fn make_adapter(config: &RunConfig, args: &ValidateArgs) -> anyhow::Result<Box<dyn Adapter>> {
    let kind = args.adapter.clone().unwrap_or_else(|| config.adapter.kind.clone());
    match kind.as_str() {
        "mock" => {
            let root = args
                .mock_root
                .clone()
                .or_else(|| config.adapter.mock_root.clone())
                .ok_or_else(|| anyhow::anyhow!("mock adapter needs --mock-root"))?;
            Ok(Box::new(runner::mock::MockAdapter::new(root)))
        }
        "defects4j" => Ok(Box::new(runner::adapter::CommandAdapter::defects4j())),
        "generic" => {
            let a = &config.adapter;
            match (&a.checkout_cmd, &a.compile_cmd, &a.test_cmd) {
                (Some(checkout), Some(compile), Some(test)) => {
                    Ok(Box::new(runner::adapter::CommandAdapter {
                        checkout_cmd: checkout.clone(),
                        compile_cmd: compile.clone(),
                        test_cmd: test.clone(),
                        relevant_test_cmd: a.relevant_test_cmd.clone(),
                    }))
                }
                _ => anyhow::bail!("generic adapter needs checkout/compile/test command templates"),
            }
        }
        other => anyhow::bail!("unknown adapter {other:?} (expected mock, defects4j, or generic)"),
    }
}

fn load_bug_filter(path: &Path) -> anyhow::Result<HashSet<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

/// Assemble validation jobs from the task list and persisted raw model
/// outputs, then run the batch.
fn validate(args: ValidateArgs, mut config: RunConfig) -> anyhow::Result<()> {
    if let Some(n) = args.samples {
        config.samples = n;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    if let Some(t) = args.timeout_compile {
        config.timeout_compile_secs = t;
    }
    if let Some(t) = args.timeout_test {
        config.timeout_test_secs = t;
    }
    let adapter = make_adapter(&config, &args)?;
    let bug_filter = args.bugs.as_deref().map(load_bug_filter).transpose()?;

    let (tasks, _) = prompt::load_tasks(&args.tasks)?;
    let tasks: Vec<GenerationTask> = tasks
        .into_iter()
        .filter(|t| match (&bug_filter, &t.bug_id) {
            (Some(filter), Some(bug)) => filter.contains(&format!("{}-{}", t.project, bug)),
            (Some(_), None) => false,
            (None, _) => true,
        })
        .collect();

    let mut jobs = Vec::new();
    for task in &tasks {
        for sample in 1..=config.samples {
            let raw_path = args.raw_dir.join(&task.task_id).join(format!("{sample}.raw.txt"));
            let raw = match std::fs::read_to_string(&raw_path) {
                Ok(raw) => raw,
                Err(_) => continue, // not generated yet
            };
            let id = CandidateId { task_id: task.task_id.clone(), sample };
            let (candidate, parse_error) = match spec_io::parse_model_output(&raw, id) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            };
            jobs.push(ValidationJob { task: task.clone(), sample, candidate, parse_error });
        }
    }

    let mut opts = RunnerOptions::new(config.workspace.join("work"), config.workspace.join("logs"));
    opts.compile_timeout = Duration::from_secs(config.timeout_compile_secs);
    opts.test_timeout = Duration::from_secs(config.timeout_test_secs);
    opts.relevant_tests = args.relevant_tests || config.relevant_tests;
    opts.jobs = config.jobs;

    let summary = runner::run_batch(&jobs, adapter.as_ref(), &opts, &args.results)?;
    println!(
        "validated {} candidates, skipped {} already in {}",
        summary.completed,
        summary.skipped,
        args.results.display()
    );
    Ok(())
}

/// Candidate-id → reasoning-trace token count, parsed from raw outputs.
fn reasoning_tokens(
    outcomes: &[runner::ValidationOutcome],
    raw_dir: &Path,
) -> HashMap<(String, u32), usize> {
    let mut map = HashMap::new();
    for outcome in outcomes {
        let path = raw_dir.join(&outcome.task_id).join(format!("{}.raw.txt", outcome.sample));
        let Ok(raw) = std::fs::read_to_string(&path) else { continue };
        let id = CandidateId { task_id: outcome.task_id.clone(), sample: outcome.sample };
        if let Ok(candidate) = spec_io::parse_model_output(&raw, id) {
            map.insert(
                (outcome.task_id.clone(), outcome.sample),
                spec_io::reasoning_length(&candidate),
            );
        }
    }
    map
}

fn dataset_command(cmd: DatasetCommand, config: RunConfig) -> anyhow::Result<()> {
    match cmd {
        DatasetCommand::Filter { repo, id, doc_coverage, builds_clean } => {
            let mut thresholds = QualityThresholds::default();
            if let Some(dc) = doc_coverage {
                thresholds.doc_coverage = dc;
            }
            let report = dataset::quality_filter(&repo, &id, &thresholds, builds_clean)?;
            println!("{}", serde_yaml::to_string(&report)?);
            anyhow::ensure!(report.accepted, "repository {id} rejected");
        }
        DatasetCommand::Curate { tasks, corpus, out_dir } => {
            let (tasks, _) = prompt::load_tasks(&tasks)?;
            let corpus = SkeletonCorpus::load(&corpus)?;
            let client = make_client(&config);
            let report = dataset::curate(
                &tasks,
                &corpus,
                &client,
                config.retrieval.top_m,
                config.retrieval.char_budget,
                Some(&out_dir.join("raw")),
            );
            std::fs::create_dir_all(&out_dir)?;
            for (task, candidate, prompt_text) in &report.candidates {
                spec_io::save_candidate(candidate, &out_dir.join("candidates"))?;
                std::fs::create_dir_all(out_dir.join("prompts"))?;
                std::fs::write(
                    out_dir.join("prompts").join(format!("{}.prompt.yaml", task.task_id)),
                    prompt_text,
                )?;
            }
            for (task_id, reason) in &report.flagged {
                eprintln!("flagged {task_id}: {reason}");
            }
            println!("curated {} candidates, {} flagged", report.candidates.len(), report.flagged.len());
        }
        DatasetCommand::Review { results, raw_dir, prompt_dir, queue_dir } => {
            let outcomes = runner::load_outcomes(&results)?;
            let candidates = collect_candidates(&outcomes, &raw_dir, &prompt_dir);
            let written = dataset::build_review_queue(&outcomes, &candidates, &queue_dir)?;
            println!("queued {} candidates for review -> {}", written.len(), queue_dir.display());
        }
        DatasetCommand::Export { results, raw_dir, prompt_dir, out, include_reasoning, queue_dir } => {
            let outcomes = runner::load_outcomes(&results)?;
            let candidates = collect_candidates(&outcomes, &raw_dir, &prompt_dir);
            let approvals: HashMap<(String, u32), dataset::ReviewEntry> = queue_dir
                .as_deref()
                .map(dataset::load_review_queue)
                .transpose()?
                .unwrap_or_default()
                .into_iter()
                .filter(|e| e.approved)
                .map(|e| ((e.task_id.clone(), e.sample), e))
                .collect();

            let mut triples = Vec::new();
            for outcome in &outcomes {
                let key = (outcome.task_id.clone(), outcome.sample);
                let approved = approvals.get(&key);
                if !outcome.semantic_ok && approved.is_none() {
                    continue;
                }
                let Some((candidate, prompt_text)) = candidates.get(&key) else { continue };
                let status = if approved.is_some() {
                    ValidationStatus::Approved
                } else {
                    ValidationStatus::Passed
                };
                let spec_only = spec_io::SpecCandidate {
                    reasoning: String::new(),
                    ..candidate.clone()
                };
                triples.push(dataset::TrainingTriple {
                    prompt: prompt_text.clone(),
                    reasoning: candidate.reasoning.clone(),
                    postcondition: spec_io::serialize_candidate(&spec_only),
                    provenance: dataset::Provenance {
                        repo: outcome.project.clone(),
                        method: format!("{}::{}", outcome.task_id, outcome.sample),
                        status,
                        reviewer_note: approved.and_then(|e| {
                            (!e.reviewer_note.is_empty()).then(|| e.reviewer_note.clone())
                        }),
                    },
                });
            }
            let n = dataset::export_sft(&triples, &out, include_reasoning || config.include_reasoning)?;
            println!("exported {n} records -> {}", out.display());
        }
    }
    Ok(())
}

fn collect_candidates(
    outcomes: &[runner::ValidationOutcome],
    raw_dir: &Path,
    prompt_dir: &Path,
) -> HashMap<(String, u32), (spec_io::SpecCandidate, String)> {
    let mut map = HashMap::new();
    for outcome in outcomes {
        let raw_path = raw_dir.join(&outcome.task_id).join(format!("{}.raw.txt", outcome.sample));
        let Ok(raw) = std::fs::read_to_string(&raw_path) else { continue };
        let id = CandidateId { task_id: outcome.task_id.clone(), sample: outcome.sample };
        let Ok(candidate) = spec_io::parse_model_output(&raw, id) else { continue };
        let prompt_text = std::fs::read_to_string(
            prompt_dir.join(format!("{}.prompt.yaml", outcome.task_id)),
        )
        .unwrap_or_default();
        map.insert((outcome.task_id.clone(), outcome.sample), (candidate, prompt_text));
    }
    map
}
