//! Acceptance suite: every release-gating property in one target.
//!
//! Covers metric correctness against a brute-force oracle, metric
//! algebraic properties, injection goldens, a hermetic end-to-end run on
//! the mock adapter, a JDK-backed integration run (ignored by default),
//! spec parsing round-trips, retrieval sanity, rank analysis, and
//! validate-run resumability.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use specgen::index::{self, Query, SkeletonCorpus};
use specgen::inject::{instrument, locate_method};
use specgen::metrics::{
    self, bug_distinguish_rate, reasoning_rank_analysis, sem_at_k, syn_at_k, SampleFlags,
    TaskOutcomes,
};
use specgen::prompt::GenerationTask;
use specgen::runner::{self, adapter::CommandAdapter, mock::MockAdapter, RunnerOptions, ValidationJob};
use specgen::spec_io::{self, CandidateId, SpecCandidate};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

// ---------------------------------------------------------------------
// 1. metric oracle equivalence

/// Independent re-derivation of the three rates, written as literally as
/// possible from their definitions.
mod oracle {
    use super::*;

    pub fn syn(tasks: &[TaskOutcomes], k: usize) -> f64 {
        let hits = tasks
            .iter()
            .filter(|t| t.samples.iter().take(k).any(|s| s.syntax_ok))
            .count();
        hits as f64 / tasks.len() as f64
    }

    pub fn sem(tasks: &[TaskOutcomes], k: usize) -> f64 {
        let hits = tasks
            .iter()
            .filter(|t| t.samples.iter().take(k).any(|s| s.semantic_ok))
            .count();
        hits as f64 / tasks.len() as f64
    }

    pub fn bug_rate(tasks: &[TaskOutcomes]) -> (usize, usize) {
        let mut pooled: HashMap<&(String, String), Vec<bool>> = HashMap::new();
        for t in tasks {
            pooled
                .entry(&t.bug_key)
                .or_default()
                .extend(t.samples.iter().map(|s| s.bug_distinguishing));
        }
        let distinguished = pooled.values().filter(|flags| flags.contains(&true)).count();
        (distinguished, pooled.len())
    }
}

fn random_flags(rng: &mut StdRng) -> SampleFlags {
    // draw a chain-respecting triple
    let syntax_ok = rng.gen_bool(0.7);
    let semantic_ok = syntax_ok && rng.gen_bool(0.6);
    let bug_distinguishing = semantic_ok && rng.gen_bool(0.5);
    SampleFlags { syntax_ok, semantic_ok, bug_distinguishing }
}

fn random_matrix(rng: &mut StdRng) -> Vec<TaskOutcomes> {
    let n_tasks = rng.gen_range(1..=10);
    let n_samples = rng.gen_range(1..=10);
    let n_bugs = rng.gen_range(1..=n_tasks);
    (0..n_tasks)
        .map(|i| TaskOutcomes {
            task_id: format!("task-{i}"),
            bug_key: ("proj".into(), format!("bug-{}", rng.gen_range(0..n_bugs))),
            samples: (0..n_samples).map(|_| random_flags(rng)).collect(),
            reasoning_tokens: (0..n_samples).map(|_| rng.gen_range(0..500)).collect(),
        })
        .collect()
}

#[test]
fn metrics_agree_with_brute_force_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(41);
    for _ in 0..250 {
        let tasks = random_matrix(&mut rng);
        let n = tasks[0].samples.len();
        for k in 1..=n {
            assert_eq!(syn_at_k(&tasks, k).unwrap(), oracle::syn(&tasks, k));
            assert_eq!(sem_at_k(&tasks, k).unwrap(), oracle::sem(&tasks, k));
        }
        let (rate, num, den) = bug_distinguish_rate(&tasks).unwrap();
        let (onum, oden) = oracle::bug_rate(&tasks);
        assert_eq!((num, den), (onum, oden));
        assert_eq!(rate, onum as f64 / oden as f64);
    }
    assert!(start.elapsed() < Duration::from_secs(5), "oracle sweep too slow");
}

// ---------------------------------------------------------------------
// 2. metric properties on generated inputs

fn flags_strategy() -> impl Strategy<Value = SampleFlags> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(a, b, c)| {
        let syntax_ok = a;
        let semantic_ok = syntax_ok && b;
        let bug_distinguishing = semantic_ok && c;
        SampleFlags { syntax_ok, semantic_ok, bug_distinguishing }
    })
}

fn tasks_strategy() -> impl Strategy<Value = Vec<TaskOutcomes>> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(n_tasks, n_samples)| {
        proptest::collection::vec(
            proptest::collection::vec(flags_strategy(), n_samples..=n_samples),
            n_tasks..=n_tasks,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, samples)| TaskOutcomes {
                    task_id: format!("t{i}"),
                    bug_key: ("p".into(), format!("b{}", i % 3)),
                    reasoning_tokens: vec![0; samples.len()],
                    samples,
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn rates_bounded_and_monotone_in_k(tasks in tasks_strategy()) {
        let n = tasks[0].samples.len();
        let mut prev_syn = 0.0;
        let mut prev_sem = 0.0;
        for k in 1..=n {
            let syn = syn_at_k(&tasks, k).unwrap();
            let sem = sem_at_k(&tasks, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&syn));
            prop_assert!((0.0..=1.0).contains(&sem));
            prop_assert!(syn >= prev_syn, "Syn@k decreased at k={k}");
            prop_assert!(sem >= prev_sem, "Sem@k decreased at k={k}");
            prop_assert!(sem <= syn, "Sem@{k} exceeded Syn@{k}");
            prev_syn = syn;
            prev_sem = sem;
        }
        let (rate, num, den) = bug_distinguish_rate(&tasks).unwrap();
        prop_assert!((0.0..=1.0).contains(&rate));
        prop_assert!(num <= den);
    }

    #[test]
    fn task_permutation_leaves_rates_unchanged(tasks in tasks_strategy(), seed in any::<u64>()) {
        let mut shuffled = tasks.clone();
        // cheap deterministic shuffle
        let mut rng = StdRng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        let n = tasks[0].samples.len();
        for k in 1..=n {
            prop_assert_eq!(syn_at_k(&tasks, k).unwrap(), syn_at_k(&shuffled, k).unwrap());
            prop_assert_eq!(sem_at_k(&tasks, k).unwrap(), sem_at_k(&shuffled, k).unwrap());
        }
        prop_assert_eq!(
            bug_distinguish_rate(&tasks).unwrap(),
            bug_distinguish_rate(&shuffled).unwrap()
        );
    }
}

// ---------------------------------------------------------------------
// 3. injection goldens

fn golden_spec(imports: &[&str], pre: &str, post: &str, condition: &str) -> SpecCandidate {
    SpecCandidate {
        candidate_id: CandidateId { task_id: "golden".into(), sample: 1 },
        imports: imports.iter().map(|s| s.to_string()).collect(),
        pre_ghost: pre.into(),
        post_ghost: post.into(),
        condition: condition.into(),
        reasoning: String::new(),
        raw: String::new(),
    }
}

#[test]
fn all_six_injection_goldens_are_byte_identical() {
    let cases: Vec<(&str, &str, &str, SpecCandidate)> = vec![
        (
            "instance",
            "org.jfree.chart.plot.CategoryPlot",
            "getLegendItems()",
            golden_spec(
                &["import java.util.Arrays;"],
                "List oldItems = this.items();",
                "List retItems = ret.items();",
                "Arrays.deepEquals(oldItems.toArray(), retItems.toArray())",
            ),
        ),
        ("static", "util.MathOps", "abs(int)", golden_spec(&[], "", "", "ret >= 0")),
        (
            "void_method",
            "util.Counter",
            "increment()",
            golden_spec(&[], "int oldCount = this.count;", "", "this.count == oldCount + 1"),
        ),
        (
            "overloaded",
            "util.Formatter",
            "format(String)",
            golden_spec(&[], "", "", "ret != null && ret.startsWith(\"[\")"),
        ),
        ("generic", "util.Identity", "id(T)", golden_spec(&[], "", "", "ret == x")),
        ("throws_decl", "io.Reader", "readLine(int)", golden_spec(&[], "", "", "ret != null")),
    ];
    let dir = fixture_dir().join("inject");
    for (name, class_fqn, signature, spec) in &cases {
        let source = std::fs::read_to_string(dir.join(format!("{name}.java"))).unwrap();
        let site = locate_method(&source, class_fqn, signature).unwrap();
        let out = instrument(&source, &site, spec, "SPEC_VIOLATION::golden::1").unwrap();
        let golden = std::fs::read_to_string(dir.join(format!("{name}.golden.java"))).unwrap();
        assert_eq!(out.rewritten, golden, "{name} drifted from its golden");
    }
}

#[test]
fn instrumented_wrapper_has_documented_element_order() {
    let golden = std::fs::read_to_string(fixture_dir().join("inject/instance.golden.java")).unwrap();
    let rename = golden.find("getLegendItems_ToBeValidated() {").expect("rename missing");
    let pre = golden.find("List oldItems = this.items();").expect("pre-ghost missing");
    let call = golden.find("ret = getLegendItems_ToBeValidated();").expect("call missing");
    let post = golden.find("List retItems = ret.items();").expect("post-ghost missing");
    let guard = golden.find("if (!(").expect("guard missing");
    let throw_site = golden.find("throw new IllegalStateException(").expect("throw missing");
    let ret = golden.rfind("return ret;").expect("return missing");
    assert!(rename < pre && pre < call && call < post && post < guard);
    assert!(guard < throw_site && throw_site < ret);
}

// ---------------------------------------------------------------------
// 4. hermetic end-to-end on the mock adapter

fn toy_task(task_id: &str) -> GenerationTask {
    GenerationTask {
        task_id: task_id.into(),
        project: "toy".into(),
        bug_id: Some("1".into()),
        class_fqn: "toy.MathOps".into(),
        method_signature: "abs(int)".into(),
        nl_doc: "Returns the absolute value of the argument.".into(),
        source_path: "src/main/java/toy/MathOps.java".into(),
    }
}

fn raw_output(reasoning: &str, condition: &str) -> String {
    format!("{reasoning}\n\n```yaml\ncondition: |\n  {condition}\n```\n")
}

fn job(task_id: &str, sample: u32, raw: &str) -> ValidationJob {
    let id = CandidateId { task_id: task_id.into(), sample };
    let (candidate, parse_error) = match spec_io::parse_model_output(raw, id) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    ValidationJob { task: toy_task(task_id), sample, candidate, parse_error }
}

#[test]
fn hermetic_pipeline_reproduces_hand_computed_report() {
    let start = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let adapter = MockAdapter::new(fixture_dir().join("toy-abs"));
    let opts = RunnerOptions::new(base.path().join("work"), base.path().join("logs"));
    let results = base.path().join("results.jsonl");

    // task A samples: malformed, correct, malformed -> syntax [F,T,F]
    // task B samples: malformed x3                  -> syntax [F,F,F]
    let jobs = vec![
        job("toy-1-a", 1, &raw_output("short trace", "ret >=")),
        job("toy-1-a", 2, &raw_output("a longer reasoning trace here", "ret >= 0")),
        job("toy-1-a", 3, &raw_output("trace", "(ret")),
        job("toy-1-b", 1, &raw_output("x", "ret ==")),
        job("toy-1-b", 2, &raw_output("y", "ret <")),
        job("toy-1-b", 3, &raw_output("z", "&& ret")),
    ];
    runner::run_batch(&jobs, &adapter, &opts, &results).unwrap();

    let outcomes = runner::load_outcomes(&results).unwrap();
    assert_eq!(outcomes.len(), 6);
    let mut reasoning = HashMap::new();
    for j in &jobs {
        if let Some(c) = &j.candidate {
            reasoning.insert(
                (j.task.task_id.clone(), j.sample),
                spec_io::reasoning_length(c),
            );
        }
    }
    let tasks = runner::collect_task_outcomes(&outcomes, &reasoning, false);
    let report = metrics::build_report(&tasks, &[1, 2, 3], BTreeMap::new()).unwrap();

    // hand-computed: only task A sample 2 compiles, passes the fixed
    // tests, and attributes the buggy failure via its marker
    assert_eq!(report.tasks, 2);
    assert_eq!(report.syn, vec![0.0, 0.5, 0.5]);
    assert_eq!(report.sem, vec![0.0, 0.5, 0.5]);
    assert_eq!((report.bugs_distinguished, report.bugs_total), (1, 1));
    assert_eq!(report.bug_rate, 1.0);

    let table = report.render_table();
    assert!(table.contains("Syn@2"));
    assert!(table.contains("1/1"));
    assert!(start.elapsed() < Duration::from_secs(10), "hermetic run too slow");
}

// ---------------------------------------------------------------------
// 5. integration end-to-end against a real JDK

fn jdk_adapter(fixture_root: &Path) -> CommandAdapter {
    CommandAdapter {
        checkout_cmd: format!("cp -r {}/{{version}}/. {{workdir}}/", fixture_root.display()),
        compile_cmd: "cd {workdir} && mkdir -p out && javac -d out $(find src -name '*.java')"
            .into(),
        test_cmd: "cd {workdir} && java -cp out toy.MathOpsTest".into(),
        relevant_test_cmd: None,
    }
}

#[test]
#[ignore = "requires a JDK (javac/java on PATH)"]
fn jdk_toy_project_classifies_and_aggregates() {
    let start = Instant::now();
    let base = tempfile::tempdir().unwrap();
    let adapter = jdk_adapter(&fixture_dir().join("toy-abs"));
    let opts = RunnerOptions::new(base.path().join("work"), base.path().join("logs"));
    let results = base.path().join("results.jsonl");

    let jobs = vec![
        job("toy-1-a", 1, &raw_output("correct spec", "ret >= 0")),
        job("toy-1-b", 1, &raw_output("wrong constant", "ret == 42")),
        job("toy-1-c", 1, &raw_output("malformed", "ret >=")),
        job("toy-1-d", 1, &raw_output("tautology", "true")),
    ];
    runner::run_batch(&jobs, &adapter, &opts, &results).unwrap();
    let outcomes = runner::load_outcomes(&results).unwrap();
    let by_id: HashMap<&str, &runner::ValidationOutcome> =
        outcomes.iter().map(|o| (o.task_id.as_str(), o)).collect();

    let correct = by_id["toy-1-a"];
    assert!(correct.syntax_ok && correct.semantic_ok && correct.bug_distinguishing);

    let wrong = by_id["toy-1-b"];
    assert!(wrong.syntax_ok && !wrong.semantic_ok);

    let malformed = by_id["toy-1-c"];
    assert!(!malformed.syntax_ok);

    let tautology = by_id["toy-1-d"];
    assert!(tautology.semantic_ok && !tautology.failure_attributed && !tautology.bug_distinguishing);

    // aggregate over the three classification tasks (a, b, c)
    let agg: Vec<runner::ValidationOutcome> =
        ["toy-1-a", "toy-1-b", "toy-1-c"].iter().map(|id| by_id[*id].clone()).collect();
    let tasks = runner::collect_task_outcomes(&agg, &HashMap::new(), false);
    assert_eq!(syn_at_k(&tasks, 1).unwrap(), 2.0 / 3.0);
    assert_eq!(sem_at_k(&tasks, 1).unwrap(), 1.0 / 3.0);
    let (_, num, den) = bug_distinguish_rate(&tasks).unwrap();
    assert_eq!((num, den), (1, 1));
    assert!(start.elapsed() < Duration::from_secs(120));
}

// ---------------------------------------------------------------------
// 6. spec parsing

#[test]
fn reference_output_parses_to_exactly_four_components() {
    let raw = std::fs::read_to_string(fixture_dir().join("candidates/legend_items.raw.txt")).unwrap();
    let id = CandidateId { task_id: "chart-1-1".into(), sample: 1 };
    let c = spec_io::parse_model_output(&raw, id).unwrap();
    assert_eq!(c.condition, "Arrays.deepEquals(oldItems, retItems)");
    assert_eq!(c.imports, vec!["import java.util.Arrays;".to_string()]);
    assert_eq!(c.pre_ghost, "List oldItems = this.items();");
    assert_eq!(c.post_ghost, "List retItems = ret.items();");
    assert!(c.reasoning.contains("legend items"), "think-block text kept as reasoning");
}

#[test]
fn fifty_candidates_round_trip_through_serialization() {
    for i in 0..50u32 {
        let original = SpecCandidate {
            candidate_id: CandidateId { task_id: format!("task-{}", i % 7), sample: i % 10 + 1 },
            imports: (0..i % 3).map(|j| format!("import java.util.Helper{j};")).collect(),
            pre_ghost: if i % 2 == 0 { format!("int old{i} = this.value;") } else { String::new() },
            post_ghost: if i % 3 == 0 { format!("int now{i} = ret;") } else { String::new() },
            condition: format!("ret >= {i} && ret <= {}", i * 2 + 1),
            reasoning: if i % 4 == 0 {
                String::new()
            } else {
                format!("reasoning trace number {i} with several words")
            },
            raw: String::new(),
        };
        let text = spec_io::serialize_candidate(&original);
        let parsed =
            spec_io::parse_model_output(&text, original.candidate_id.clone()).unwrap();
        assert_eq!(parsed.condition, original.condition, "candidate {i}");
        assert_eq!(parsed.imports, original.imports, "candidate {i}");
        assert_eq!(parsed.pre_ghost, original.pre_ghost, "candidate {i}");
        assert_eq!(parsed.post_ghost, original.post_ghost, "candidate {i}");
        assert_eq!(parsed.reasoning, original.reasoning, "candidate {i}");
    }
}

// ---------------------------------------------------------------------
// 7. retrieval

const WORDS: [&str; 20] = [
    "alpha", "bravo", "chario", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima", "mike", "november", "oscar", "papa", "quebec", "romeo", "sierra", "tango",
];

fn synthetic_corpus() -> SkeletonCorpus {
    let mut skeletons = Vec::new();
    for (i, word) in WORDS.iter().enumerate() {
        let class = format!("{}{}Service", uppercase_first(word), i);
        let source = format!(
            "package synth;\n\npublic class {class} {{\n    public void {word}Load() {{}}\n    public int {word}CountItems() {{ return 0; }}\n    public String {word}RenderLabel() {{ return null; }}\n}}\n"
        );
        skeletons.extend(
            index::skeletons_from_source(&source, &format!("synth/{class}.java")).unwrap(),
        );
    }
    SkeletonCorpus::build(skeletons)
}

fn uppercase_first(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[test]
fn every_synthetic_class_self_retrieves_at_rank_one() {
    let corpus = synthetic_corpus();
    assert_eq!(corpus.skeletons.len(), 20);
    for (i, word) in WORDS.iter().enumerate() {
        let class = format!("synth.{}{}Service", uppercase_first(word), i);
        let query = Query {
            text: format!("{word} load count items render label"),
            target_class: None,
        };
        let ranked = corpus.retrieve(&query, 5, usize::MAX);
        assert_eq!(ranked[0].qualified_name, class, "self-retrieval failed for {class}");
    }
}

#[test]
fn retrieval_ranking_is_deterministic_across_rebuilds() {
    let a = synthetic_corpus();
    let b = synthetic_corpus();
    for word in &WORDS {
        let query = Query { text: format!("{word} render label"), target_class: None };
        let ranked_a: Vec<&str> =
            a.retrieve(&query, 20, usize::MAX).iter().map(|s| s.qualified_name.as_str()).collect();
        let ranked_b: Vec<&str> =
            b.retrieve(&query, 20, usize::MAX).iter().map(|s| s.qualified_name.as_str()).collect();
        assert_eq!(ranked_a, ranked_b);
    }
}

// ---------------------------------------------------------------------
// 8. rank analysis

#[test]
fn rank_analysis_matches_hand_computed_fixture() {
    let flags = |sem: bool| SampleFlags { syntax_ok: true, semantic_ok: sem, bug_distinguishing: false };
    let a = TaskOutcomes {
        task_id: "a".into(),
        bug_key: ("p".into(), "1".into()),
        samples: vec![flags(true); 3],
        reasoning_tokens: vec![5, 1, 9],
    };
    let b = TaskOutcomes {
        task_id: "b".into(),
        bug_key: ("p".into(), "2".into()),
        samples: vec![flags(false); 3],
        reasoning_tokens: vec![2, 2, 7],
    };
    let series = reasoning_rank_analysis(&[a, b]).unwrap();
    assert_eq!(series.len(), 3);
    // rank 1: tokens (1+2)/2, rank 2: (5+2)/2, rank 3: (9+7)/2
    assert_eq!(series[0].mean_tokens, 1.5);
    assert_eq!(series[1].mean_tokens, 3.5);
    assert_eq!(series[2].mean_tokens, 8.0);
    // task a is semantically correct at every rank, task b never
    for point in &series {
        assert_eq!(point.sem_at_1, 0.5);
    }
}

#[test]
fn rank_means_are_nondecreasing_on_random_inputs() {
    let mut rng = StdRng::seed_from_u64(97);
    for _ in 0..100 {
        let tasks = random_matrix(&mut rng);
        let series = reasoning_rank_analysis(&tasks).unwrap();
        for pair in series.windows(2) {
            assert!(
                pair[1].mean_tokens >= pair[0].mean_tokens,
                "mean tokens decreased between ranks {} and {}",
                pair[0].rank,
                pair[1].rank
            );
        }
    }
}

// ---------------------------------------------------------------------
// 9. resumability

#[test]
fn interrupted_validate_run_resumes_to_the_same_log() {
    let base = tempfile::tempdir().unwrap();
    let adapter = MockAdapter::new(fixture_dir().join("toy-abs"));
    let conditions = ["ret >= 0", "ret == 42", "ret >=", "true", "ret <= 100", "ret != 7"];
    let jobs: Vec<ValidationJob> = conditions
        .iter()
        .enumerate()
        .map(|(i, cond)| job("toy-1-a", i as u32 + 1, &raw_output("trace", cond)))
        .collect();

    // uninterrupted reference run
    let reference = base.path().join("reference.jsonl");
    runner::run_batch(&jobs, &adapter, &RunnerOptions::new(base.path().join("w0"), base.path().join("l0")), &reference)
        .unwrap();

    // interrupted: first 2 jobs, then resume with the full list
    let resumed = base.path().join("resumed.jsonl");
    runner::run_batch(&jobs[..2], &adapter, &RunnerOptions::new(base.path().join("w1"), base.path().join("l1")), &resumed)
        .unwrap();
    let summary = runner::run_batch(
        &jobs,
        &adapter,
        &RunnerOptions::new(base.path().join("w2"), base.path().join("l2")),
        &resumed,
    )
    .unwrap();
    assert_eq!(summary.skipped, 2);

    let key = |o: &runner::ValidationOutcome| {
        (
            o.task_id.clone(),
            o.sample,
            o.syntax_ok,
            o.semantic_ok,
            o.bug_distinguishing,
            o.failure_attributed,
            o.harness_error.clone(),
        )
    };
    let reference_set: HashSet<_> =
        runner::load_outcomes(&reference).unwrap().iter().map(key).collect();
    let resumed_set: HashSet<_> =
        runner::load_outcomes(&resumed).unwrap().iter().map(key).collect();
    assert_eq!(reference_set, resumed_set);
    assert_eq!(resumed_set.len(), jobs.len());
}
