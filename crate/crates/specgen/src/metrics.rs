//! Aggregation of validation outcomes into Syn@k, Sem@k, the bug
//! distinguish rate, and the reasoning-length rank analysis.
//!
//! Syn@k and Sem@k are means over tasks of "any of the first k samples
//! passes". The bug rate pools every sample of every task sharing a bug
//! key and counts a bug as distinguished when at least one pooled sample
//! is bug-distinguishing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleFlags {
    pub syntax_ok: bool,
    pub semantic_ok: bool,
    pub bug_distinguishing: bool,
}

impl SampleFlags {
    /// semantic ⇒ syntactic, distinguishing ⇒ semantic.
    pub fn chain_holds(&self) -> bool {
        (!self.semantic_ok || self.syntax_ok) && (!self.bug_distinguishing || self.semantic_ok)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcomes {
    pub task_id: String,
    /// (project, bug id); tasks from the same bug fix share a key.
    pub bug_key: (String, String),
    /// Per-sample flags, in generation order.
    pub samples: Vec<SampleFlags>,
    /// Whitespace-token counts of each sample's reasoning trace.
    pub reasoning_tokens: Vec<usize>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("k={k} out of range for task {task_id} with {n} samples")]
    KOutOfRange { k: usize, task_id: String, n: usize },
    #[error("no outcomes given")]
    EmptyInput,
    #[error("task {0} violates the syntax/semantic/bug-distinguishing implication chain")]
    BrokenChain(String),
    #[error("ragged sample counts: task {task_id} has {n}, expected {expected}")]
    RaggedSamples { task_id: String, n: usize, expected: usize },
}

fn validate(outcomes: &[TaskOutcomes]) -> Result<(), MetricsError> {
    for t in outcomes {
        if t.samples.iter().any(|s| !s.chain_holds()) {
            return Err(MetricsError::BrokenChain(t.task_id.clone()));
        }
    }
    Ok(())
}

fn at_k(
    outcomes: &[TaskOutcomes],
    k: usize,
    flag: impl Fn(&SampleFlags) -> bool,
) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    validate(outcomes)?;
    for t in outcomes {
        if k < 1 || k > t.samples.len() {
            return Err(MetricsError::KOutOfRange {
                k,
                task_id: t.task_id.clone(),
                n: t.samples.len(),
            });
        }
    }
    let hits = outcomes
        .iter()
        .filter(|t| t.samples[..k].iter().any(&flag))
        .count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// Fraction of tasks where at least one of the first k samples compiles.
pub fn syn_at_k(outcomes: &[TaskOutcomes], k: usize) -> Result<f64, MetricsError> {
    at_k(outcomes, k, |s| s.syntax_ok)
}

/// Fraction of tasks where at least one of the first k samples passes all
/// tests on the fixed version.
pub fn sem_at_k(outcomes: &[TaskOutcomes], k: usize) -> Result<f64, MetricsError> {
    at_k(outcomes, k, |s| s.semantic_ok)
}

/// (rate, distinguished bugs, total bugs). A bug is distinguished when
/// any sample of any of its tasks is bug-distinguishing.
pub fn bug_distinguish_rate(
    outcomes: &[TaskOutcomes],
) -> Result<(f64, usize, usize), MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    validate(outcomes)?;
    let mut bugs: BTreeMap<&(String, String), bool> = BTreeMap::new();
    for t in outcomes {
        let hit = t.samples.iter().any(|s| s.bug_distinguishing);
        *bugs.entry(&t.bug_key).or_insert(false) |= hit;
    }
    let total = bugs.len();
    let distinguished = bugs.values().filter(|&&v| v).count();
    Ok((distinguished as f64 / total as f64, distinguished, total))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankPoint {
    /// 1 = shortest reasoning within a task, n = longest.
    pub rank: usize,
    pub mean_tokens: f64,
    pub sem_at_1: f64,
}

/// Within each task, sort samples ascending by reasoning token count
/// (ties by sample index) and assign ranks 1..n; report per-rank mean
/// token count and Sem@1 across tasks.
pub fn reasoning_rank_analysis(outcomes: &[TaskOutcomes]) -> Result<Vec<RankPoint>, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    validate(outcomes)?;
    let n = outcomes[0].samples.len();
    for t in outcomes {
        if t.samples.len() != n || t.reasoning_tokens.len() != n {
            return Err(MetricsError::RaggedSamples {
                task_id: t.task_id.clone(),
                n: t.samples.len().min(t.reasoning_tokens.len()),
                expected: n,
            });
        }
    }
    let mut points = Vec::with_capacity(n);
    for rank in 0..n {
        let mut tokens_sum = 0usize;
        let mut sem_hits = 0usize;
        for t in outcomes {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&i| (t.reasoning_tokens[i], i));
            let idx = order[rank];
            tokens_sum += t.reasoning_tokens[idx];
            if t.samples[idx].semantic_ok {
                sem_hits += 1;
            }
        }
        points.push(RankPoint {
            rank: rank + 1,
            mean_tokens: tokens_sum as f64 / outcomes.len() as f64,
            sem_at_1: sem_hits as f64 / outcomes.len() as f64,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k_set: Vec<usize>,
    /// k -> rate, aligned with `k_set`.
    pub syn: Vec<f64>,
    pub sem: Vec<f64>,
    pub bug_rate: f64,
    pub bugs_distinguished: usize,
    pub bugs_total: usize,
    pub rank_series: Vec<RankPoint>,
    pub tasks: usize,
    /// Run provenance: prompt template hash, endpoint, adapter, config echo.
    pub metadata: BTreeMap<String, String>,
}

pub fn build_report(
    outcomes: &[TaskOutcomes],
    k_set: &[usize],
    metadata: BTreeMap<String, String>,
) -> Result<MetricsReport, MetricsError> {
    let mut syn = Vec::new();
    let mut sem = Vec::new();
    for &k in k_set {
        syn.push(syn_at_k(outcomes, k)?);
        sem.push(sem_at_k(outcomes, k)?);
    }
    let (bug_rate, distinguished, total) = bug_distinguish_rate(outcomes)?;
    // rank analysis needs uniform sample counts; skip the series otherwise
    let rank_series = reasoning_rank_analysis(outcomes).unwrap_or_default();
    Ok(MetricsReport {
        k_set: k_set.to_vec(),
        syn,
        sem,
        bug_rate,
        bugs_distinguished: distinguished,
        bugs_total: total,
        rank_series,
        tasks: outcomes.len(),
        metadata,
    })
}

impl MetricsReport {
    /// Human-readable table, one column per metric.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tasks: {}", self.tasks);
        let mut header = String::new();
        let mut row = String::new();
        for (i, k) in self.k_set.iter().enumerate() {
            let _ = write!(header, "Sem@{k:<7}");
            let _ = write!(row, "{:<10}", format!("{:.1}%", self.sem[i] * 100.0));
        }
        for (i, k) in self.k_set.iter().enumerate() {
            let _ = write!(header, "Syn@{k:<7}");
            let _ = write!(row, "{:<10}", format!("{:.1}%", self.syn[i] * 100.0));
        }
        let _ = write!(header, "{:<10}{}", "r_BugD", "#Bugs");
        let _ = write!(
            row,
            "{:<10}{}/{}",
            format!("{:.1}%", self.bug_rate * 100.0),
            self.bugs_distinguished,
            self.bugs_total
        );
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{row}");
        if !self.rank_series.is_empty() {
            let _ = writeln!(out, "\nreasoning-length rank analysis");
            let _ = writeln!(out, "{:<6}{:<14}{}", "rank", "mean_tokens", "sem@1");
            for p in &self.rank_series {
                let _ = writeln!(out, "{:<6}{:<14.2}{:.3}", p.rank, p.mean_tokens, p.sem_at_1);
            }
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    /// CSV of the rank series for external plotting.
    pub fn rank_series_csv(&self) -> String {
        let mut out = String::from("rank,mean_tokens,sem_at_1\n");
        for p in &self.rank_series {
            let _ = writeln!(out, "{},{},{}", p.rank, p.mean_tokens, p.sem_at_1);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(syn: bool, sem: bool, bug: bool) -> SampleFlags {
        SampleFlags { syntax_ok: syn, semantic_ok: sem, bug_distinguishing: bug }
    }

    fn task(id: &str, bug: (&str, &str), pattern: &[(bool, bool, bool)]) -> TaskOutcomes {
        TaskOutcomes {
            task_id: id.into(),
            bug_key: (bug.0.into(), bug.1.into()),
            samples: pattern.iter().map(|&(a, b, c)| flags(a, b, c)).collect(),
            reasoning_tokens: vec![0; pattern.len()],
        }
    }

    #[test]
    fn constant_matrices_hit_the_extremes() {
        let all_fail = vec![task("a", ("p", "1"), &[(false, false, false); 3])];
        let all_pass = vec![task("a", ("p", "1"), &[(true, true, true); 3])];
        assert_eq!(syn_at_k(&all_fail, 2).unwrap(), 0.0);
        assert_eq!(syn_at_k(&all_pass, 2).unwrap(), 1.0);
        assert_eq!(sem_at_k(&all_pass, 1).unwrap(), 1.0);
    }

    #[test]
    fn two_task_example_gives_half() {
        let outcomes = vec![
            task("a", ("p", "1"), &[(false, false, false), (true, false, false), (false, false, false)]),
            task("b", ("p", "2"), &[(false, false, false), (false, false, false), (false, false, false)]),
        ];
        assert_eq!(syn_at_k(&outcomes, 2).unwrap(), 0.5);
    }

    #[test]
    fn k_out_of_range_errors() {
        let outcomes = vec![task("a", ("p", "1"), &[(true, true, false); 3])];
        assert!(matches!(syn_at_k(&outcomes, 0), Err(MetricsError::KOutOfRange { .. })));
        assert!(matches!(syn_at_k(&outcomes, 4), Err(MetricsError::KOutOfRange { .. })));
    }

    #[test]
    fn broken_chain_is_rejected() {
        let outcomes = vec![task("a", ("p", "1"), &[(false, true, false)])];
        assert!(matches!(syn_at_k(&outcomes, 1), Err(MetricsError::BrokenChain(_))));
    }

    #[test]
    fn bug_counting_pools_tasks() {
        // 4 bugs, one distinguished
        let outcomes = vec![
            task("a", ("p", "1"), &[(true, true, true)]),
            task("b", ("p", "2"), &[(true, true, false)]),
            task("c", ("p", "3"), &[(false, false, false)]),
            task("d", ("p", "4"), &[(true, false, false)]),
        ];
        assert_eq!(bug_distinguish_rate(&outcomes).unwrap(), (0.25, 1, 4));

        // one bug spanning 2 tasks, only the second distinguishes: counts once
        let outcomes = vec![
            task("a", ("p", "1"), &[(true, true, false)]),
            task("b", ("p", "1"), &[(true, true, true)]),
        ];
        assert_eq!(bug_distinguish_rate(&outcomes).unwrap(), (1.0, 1, 1));
    }

    #[test]
    fn empty_input_errors() {
        assert_eq!(bug_distinguish_rate(&[]), Err(MetricsError::EmptyInput));
        assert_eq!(syn_at_k(&[], 1), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn rank_analysis_hand_example() {
        // 2 tasks x 3 samples, lengths (5,1,9) and (2,2,7)
        let mut a = task("a", ("p", "1"), &[(true, true, false); 3]);
        a.reasoning_tokens = vec![5, 1, 9];
        let mut b = task("b", ("p", "2"), &[(true, false, false); 3]);
        b.reasoning_tokens = vec![2, 2, 7];
        let series = reasoning_rank_analysis(&[a, b]).unwrap();
        assert_eq!(series[0].mean_tokens, 1.5);
        assert_eq!(series[1].mean_tokens, 3.5);
        assert_eq!(series[2].mean_tokens, 8.0);
        assert_eq!(series[0].sem_at_1, 0.5);
    }

    #[test]
    fn rank_ties_follow_sample_index() {
        let mut a = task("a", ("p", "1"), &[(true, true, false), (true, false, false)]);
        a.reasoning_tokens = vec![4, 4];
        let series = reasoning_rank_analysis(&[a]).unwrap();
        assert_eq!(series[0].sem_at_1, 1.0); // sample 0 at rank 1
        assert_eq!(series[1].sem_at_1, 0.0);
        assert_eq!(series[0].mean_tokens, series[1].mean_tokens);
    }

    #[test]
    fn ragged_samples_error() {
        let a = task("a", ("p", "1"), &[(true, true, false); 2]);
        let b = task("b", ("p", "2"), &[(true, true, false); 3]);
        assert!(matches!(
            reasoning_rank_analysis(&[a, b]),
            Err(MetricsError::RaggedSamples { .. })
        ));
    }

    #[test]
    fn report_renders_numerator_denominator() {
        let outcomes = vec![
            task("a", ("p", "1"), &[(true, true, true)]),
            task("b", ("p", "2"), &[(true, false, false)]),
        ];
        let report = build_report(&outcomes, &[1], BTreeMap::new()).unwrap();
        let table = report.render_table();
        assert!(table.contains("1/2"), "{table}");
    }
}
